#include "ctc/stability.hpp"

#include "ctc/csv.hpp"
#include "ctc/errors.hpp"
#include "ctc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ctc {

namespace {

Eigen::VectorXd flatten(const ClusterState& s) {
    Eigen::VectorXd v(3 * static_cast<Eigen::Index>(s.size()));
    for (std::size_t n = 0; n < s.size(); ++n) {
        v(3 * n) = s[n].x;
        v(3 * n + 1) = s[n].y;
        v(3 * n + 2) = s[n].z;
    }
    return v;
}

ClusterState unflatten(const Eigen::VectorXd& v) {
    ClusterState s(static_cast<std::size_t>(v.size() / 3));
    for (std::size_t n = 0; n < s.size(); ++n) s[n] = {v(3 * n), v(3 * n + 1), v(3 * n + 2)};
    return s;
}

Eigen::VectorXd residual(const Eigen::VectorXd& x, const CouplingParams& p, const ClusterGeometry& g) {
    return flatten(bloch_rhs(unflatten(x), p, g));
}

double max_abs_diff(const ClusterState& a, const ClusterState& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max({m, std::abs(a[i].x - b[i].x), std::abs(a[i].y - b[i].y), std::abs(a[i].z - b[i].z)});
    }
    return m;
}

void analyse(ScanPoint& pt, const CouplingParams& p, const ClusterGeometry& g) {
    if (!pt.converged) return;
    const auto report = eigenvalues_sorted(analytic_jacobian(pt.fixed_point, p, g));
    pt.lambda1 = report.eigenvalues.at(0);
    pt.lambda2 = report.eigenvalues.size() > 1 ? report.eigenvalues[1] : std::complex<double>{};
    pt.conjugate_pair = report.leading_imag_pair;
}

// Bisects Re[lambda1] on [a, b] continuing the fixed point from the left end.
double bisect_crossing(const CouplingParams& base, const ClusterGeometry& geom, const std::string& axis,
                       const ScanPoint& left, const ScanPoint& right, const ScanOptions& opts) {
    double a = left.value;
    double b = right.value;
    double fa = left.lambda1.real();
    ClusterState seed = left.fixed_point;
    while (std::abs(b - a) > opts.bisection_tol) {
        const double mid = 0.5 * (a + b);
        const CouplingParams p = base.with(axis, mid);
        const FixedPoint fp = find_fixed_point(p, geom, seed, opts.newton);
        if (!fp.converged) break;
        const double fm = eigenvalues_sorted(analytic_jacobian(fp.state, p, geom)).leading_real;
        if ((fm > 0.0) == (fa > 0.0)) {
            a = mid;
            fa = fm;
            seed = fp.state;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

JacobianMatrix analytic_jacobian(const ClusterState& point, const CouplingParams& params,
                                 const ClusterGeometry& geom) {
    if (point.size() != geom.size()) throw std::invalid_argument("state size does not match geometry");
    const auto n_sites = static_cast<Eigen::Index>(geom.size());
    JacobianMatrix jac = JacobianMatrix::Zero(3 * n_sites, 3 * n_sites);
    const double inv_d = 1.0 / CouplingParams::kDivisor;
    const double g = params.gamma;

    for (Eigen::Index n = 0; n < n_sites; ++n) {
        const auto site = static_cast<std::size_t>(n);
        const FieldVector field = effective_field(site, point, params, geom);
        const double bx = field.bx * inv_d, by = field.by * inv_d, bz = field.bz * inv_d;
        const BlochVector& v = point[site];
        auto blk = jac.block<3, 3>(3 * n, 3 * n);
        // d(b x v)/dv plus decay.
        blk(0, 0) += -0.5 * g;
        blk(0, 1) += -bz;
        blk(0, 2) += by;
        blk(1, 0) += bz;
        blk(1, 1) += -0.5 * g;
        blk(1, 2) += -bx;
        blk(2, 0) += -by;
        blk(2, 1) += bx;
        blk(2, 2) += -g;

        // d(b x v)/db * db/dv_m = -[v]_x diag(J)/d for each neighbour entry.
        for (std::size_t m : geom.neighbors(site)) {
            auto off = jac.block<3, 3>(3 * n, 3 * static_cast<Eigen::Index>(m));
            off(0, 1) += v.z * params.jy * inv_d;
            off(0, 2) += -v.y * params.jz * inv_d;
            off(1, 0) += -v.z * params.jx * inv_d;
            off(1, 2) += v.x * params.jz * inv_d;
            off(2, 0) += v.y * params.jx * inv_d;
            off(2, 1) += -v.x * params.jy * inv_d;
        }
    }
    return jac;
}

FixedPoint find_fixed_point(const CouplingParams& params, const ClusterGeometry& geom, const ClusterState& guess,
                            const NewtonOptions& opts) {
    params.validate();
    if (guess.size() != geom.size()) throw std::invalid_argument("guess size does not match geometry");

    Eigen::VectorXd x = flatten(guess);
    Eigen::VectorXd f = residual(x, params, geom);
    FixedPoint out;
    for (int it = 0;; ++it) {
        out.iterations = it;
        if (f.lpNorm<Eigen::Infinity>() < opts.tol) {
            out.converged = true;
            break;
        }
        if (it >= opts.max_iter) break;

        const JacobianMatrix jac = analytic_jacobian(unflatten(x), params, geom);
        Eigen::FullPivLU<JacobianMatrix> lu(jac);
        Eigen::VectorXd step;
        if (lu.isInvertible() && lu.rcond() > 1e-14) {
            step = -lu.solve(f);
        } else {
            const Eigen::VectorXd grad = jac.transpose() * f;
            const double denom = (jac * grad).squaredNorm();
            if (!(denom > 0.0)) break;
            step = -(grad.squaredNorm() / denom) * grad;
        }

        const double merit = f.norm();
        double scale = 1.0;
        bool improved = false;
        for (int h = 0; h <= opts.max_halvings; ++h, scale *= 0.5) {
            const Eigen::VectorXd trial = x + scale * step;
            const Eigen::VectorXd ft = residual(trial, params, geom);
            if (ft.allFinite() && ft.norm() < merit) {
                x = trial;
                f = ft;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    out.state = unflatten(x);
    out.residual_norm = f.lpNorm<Eigen::Infinity>();
    return out;
}

StabilityReport eigenvalues_sorted(const JacobianMatrix& jac, bool check_vectors) {
    if (jac.rows() != jac.cols()) throw std::invalid_argument("Jacobian must be square");
    if (!jac.allFinite()) throw std::invalid_argument("Jacobian has non-finite entries");

    Eigen::EigenSolver<JacobianMatrix> solver(jac, check_vectors);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigensolver did not converge (||J||_F = " + std::to_string(jac.norm()) +
                             ", dimension " + std::to_string(jac.rows()) + ")");
    }
    const Eigen::VectorXcd values = solver.eigenvalues();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (values(a).real() != values(b).real()) return values(a).real() > values(b).real();
        return values(a).imag() > values(b).imag();
    });

    StabilityReport report;
    for (Eigen::Index i : order) report.eigenvalues.push_back(values(i));
    if (!report.eigenvalues.empty()) report.leading_real = report.eigenvalues[0].real();
    if (report.eigenvalues.size() > 1) {
        const auto l1 = report.eigenvalues[0];
        const auto l2 = report.eigenvalues[1];
        report.leading_imag_pair =
            std::abs(l1.imag()) > 1e-10 && std::abs(l1 - std::conj(l2)) <= 1e-8 * std::max(1.0, std::abs(l1));
    }
    if (check_vectors) {
        const Eigen::MatrixXcd vecs = solver.eigenvectors();
        const Eigen::MatrixXcd jc = jac.cast<std::complex<double>>();
        const double jnorm = std::max(jac.norm(), 1e-300);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            const Eigen::VectorXcd v = vecs.col(i);
            worst = std::max(worst, (jc * v - values(i) * v).norm() / (jnorm * v.norm()));
        }
        report.max_relative_residual = worst;
    }
    return report;
}

ClusterState relaxed_guess(const CouplingParams& params, const ClusterGeometry& geom, const InitialStateSpec& spec,
                           double t_relax, double dt) {
    params.validate();
    ClusterState y = build_initial_state(spec, geom);
    Rk4Stepper stepper(geom, params, dt);
    stepper.advance(y, 0, std::lround(t_relax / dt));
    for (const auto& v : y) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
            throw NumericalError("relaxation run became non-finite", t_relax);
        }
    }
    return y;
}

StabilityScan scan_stability_boundary(const CouplingParams& base, const ClusterGeometry& geom,
                                      const std::string& axis, double lo, double hi, int steps,
                                      const ClusterState& seed, const ScanOptions& opts) {
    base.get(axis);
    if (!(lo < hi)) throw std::invalid_argument("scan range needs lo < hi");
    if (steps < 8) throw std::invalid_argument("scan needs at least 8 steps");

    StabilityScan scan;
    scan.axis = axis;
    scan.points.resize(static_cast<std::size_t>(steps) + 1);

    // Continuation along the grid; a failed point keeps the last good seed.
    ClusterState guess = seed;
    std::optional<ClusterState> previous;
    for (int i = 0; i <= steps; ++i) {
        ScanPoint& pt = scan.points[static_cast<std::size_t>(i)];
        pt.value = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps);
        const FixedPoint fp = find_fixed_point(base.with(axis, pt.value), geom, guess, opts.newton);
        pt.converged = fp.converged;
        pt.residual_norm = fp.residual_norm;
        pt.fixed_point = fp.state;
        if (fp.converged) {
            if (previous && max_abs_diff(*previous, fp.state) > opts.branch_jump) {
                scan.branch_switches.push_back(pt.value);
            }
            previous = fp.state;
            guess = fp.state;
        }
    }

    parallel_for(scan.points.size(), opts.workers, [&](std::size_t i) {
        analyse(scan.points[i], base.with(axis, scan.points[i].value), geom);
    });

    for (std::size_t i = 0; i < scan.points.size();) {
        if (scan.points[i].converged) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < scan.points.size() && !scan.points[j + 1].converged) ++j;
        scan.gaps.emplace_back(scan.points[i].value, scan.points[j].value);
        i = j + 1;
    }

    std::vector<std::size_t> brackets;
    for (std::size_t i = 0; i + 1 < scan.points.size(); ++i) {
        const auto& a = scan.points[i];
        const auto& b = scan.points[i + 1];
        if (a.converged && b.converged && (a.lambda1.real() > 0.0) != (b.lambda1.real() > 0.0)) {
            brackets.push_back(i);
        }
    }
    std::vector<double> refined(brackets.size());
    parallel_for(brackets.size(), opts.workers, [&](std::size_t k) {
        const std::size_t i = brackets[k];
        refined[k] = bisect_crossing(base, geom, axis, scan.points[i], scan.points[i + 1], opts);
    });
    scan.crossings = std::move(refined);
    return scan;
}

void write_scan_csv(const StabilityScan& scan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "axis_value,re_l1,im_l1,re_l2,im_l2,converged\n";
    for (const auto& p : scan.points) {
        out << format_exact(p.value) << ',' << format_exact(p.lambda1.real()) << ','
            << format_exact(p.lambda1.imag()) << ',' << format_exact(p.lambda2.real()) << ','
            << format_exact(p.lambda2.imag()) << ',' << (p.converged ? 1 : 0) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ctc
