#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <variant>
#include <vector>

namespace ctc {

/// Single-site Pauli expectation values (<sx>, <sy>, <sz>).
struct BlochVector {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm_squared() const { return x * x + y * y + z * z; }
    double norm() const;

    friend bool operator==(const BlochVector&, const BlochVector&) = default;
};

/// Row-major sequence of per-site Bloch vectors (0-based internally).
using ClusterState = std::vector<BlochVector>;

/// Two-level spinor a|up> + b|down>.
struct Spinor {
    std::complex<double> up;
    std::complex<double> down;
};

/// Periodic rows x cols cluster on a 2D square lattice.
///
/// Each site carries exactly four neighbour entries (up, down, left, right
/// after periodic wrap). On tori narrower than 3 sites the entries repeat, so
/// the table is a multiset; effective fields and Jacobians count repeated
/// entries with multiplicity.
class ClusterGeometry {
public:
    static constexpr int kDimension = 2;
    static constexpr std::size_t kCoordination = 2 * kDimension;

    using NeighborList = std::array<std::size_t, kCoordination>;

    ClusterGeometry(int rows, int cols);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return neighbors_.size(); }

    int row(std::size_t site) const { return static_cast<int>(site) / cols_; }
    int col(std::size_t site) const { return static_cast<int>(site) % cols_; }
    std::size_t site(int row, int col) const;

    const NeighborList& neighbors(std::size_t site) const;

    /// Number of times `other` appears in the neighbour multiset of `site`.
    int multiplicity(std::size_t site, std::size_t other) const;

private:
    int rows_;
    int cols_;
    std::vector<NeighborList> neighbors_;
};

ClusterGeometry build_cluster_geometry(int rows, int cols);

/// Maps a normalized spinor to its Bloch vector with
/// sx = 2 Re(conj(a) b), sy = 2 Im(conj(a) b), sz = |a|^2 - |b|^2.
BlochVector spinor_to_bloch(std::complex<double> a, std::complex<double> b);
BlochVector spinor_to_bloch(const Spinor& s);

/// A spinor whose Bloch vector points along `v` (v must be nonzero).
/// The global phase is fixed by choosing `up` real and non-negative.
Spinor bloch_to_spinor(const BlochVector& v);

// Initial-state families.

/// (|up> + e^{i n pi/9}|down>)/sqrt(2), n the 1-based site label.
struct EquatorPhase {};

/// (|up> + sqrt(99) e^{i (row+col) pi/3}|down>)/10 with 0-based row/col.
struct RowColPhase {};

struct Uniform {
    BlochVector bloch;
};

struct Explicit {
    ClusterState sites;
};

using InitialStateSpec = std::variant<EquatorPhase, RowColPhase, Uniform, Explicit>;

/// Per-site spinors for the spinor-defined families; Bloch-defined sites with
/// unit length are lifted to spinors, shorter (mixed) vectors are rejected.
std::vector<Spinor> build_initial_spinors(const InitialStateSpec& spec, const ClusterGeometry& geom);

ClusterState build_initial_state(const InitialStateSpec& spec, const ClusterGeometry& geom);

/// Spin-down product state (0, 0, -1) on every site.
ClusterState paramagnetic_state(const ClusterGeometry& geom);

BlochVector cluster_average(const ClusterState& state);

}  // namespace ctc
