#include "ctc/phases.hpp"
#include "ctc/stability.hpp"

#include "doctest.h"

#include <fstream>
#include <sstream>

using namespace ctc;

namespace {

const ClusterGeometry kGeom(3, 3);

ClassifyConfig quick() {
    ClassifyConfig c;
    c.lyapunov.t_total = 4000;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ctc_test_phases_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

SweepConfig small_grid(const std::filesystem::path& dir) {
    SweepConfig cfg;
    cfg.first = {"jx", 1.0, 6.0, 3};
    cfg.second = {"jy", 1.0, 1.5, 2};
    cfg.classify = quick();
    cfg.chunk_size = 1;
    cfg.checkpoint = dir / "checkpoint.json";
    return cfg;
}

}  // namespace

TEST_CASE("XXZ point is PM and PM is a genuine rest state") {
    const auto l = classify({1, 1, 1, 1}, kGeom, EquatorPhase{}, quick());
    CHECK(l.phase == Phase::PM);
    CHECK(l.amplitude < 1e-4);
    CHECK_FALSE(l.lambda.has_value());
    const auto traj = integrate(build_initial_state(EquatorPhase{}, kGeom), {1, 1, 1, 1}, kGeom, 600.0, {});
    CHECK(rhs_max_norm(traj.states.back(), {1, 1, 1, 1}, kGeom) < 1e-6);
}

TEST_CASE("reference triple along jy=1.1 and label stability under dt halving") {
    const std::pair<double, Phase> cases[] = {{5.0, Phase::SDW}, {10.0, Phase::LC}, {15.0, Phase::Chaos}};
    for (const auto& [jx, want] : cases) {
        ClassifyConfig cfg = quick();
        const auto l = classify({jx, 1.1, 1, 1}, kGeom, EquatorPhase{}, cfg);
        CHECK_MESSAGE(l.phase == want, "jx=", jx, " got ", to_string(l.phase));
        CHECK(is_oscillatory(l.phase) == l.lambda.has_value());
        CHECK((l.phase == Phase::LC) == l.omega_p.has_value());

        cfg.integrator.dt /= 2;
        cfg.lyapunov.dt /= 2;
        CHECK(classify({jx, 1.1, 1, 1}, kGeom, EquatorPhase{}, cfg).phase == want);
    }
}

TEST_CASE("classification is deterministic") {
    const auto a = classify({15, 1.1, 1, 1}, kGeom, EquatorPhase{}, quick());
    const auto b = classify({15, 1.1, 1, 1}, kGeom, EquatorPhase{}, quick());
    CHECK(a.phase == b.phase);
    CHECK(a.amplitude == b.amplitude);
    CHECK(a.lambda == b.lambda);
}

TEST_CASE("FM and SDW are split by spatial uniformity") {
    // A uniform in-plane state with jx = jy keeps every site identical.
    ClassifyConfig cfg = quick();
    const auto uniform = classify({5, 1.1, 1, 1}, kGeom, Uniform{{1, 0, 0}}, cfg);
    CHECK(uniform.nonuniformity < 1e-3);
    CHECK(uniform.phase != Phase::SDW);
    const auto sdw = classify({5, 1.1, 1, 1}, kGeom, EquatorPhase{}, cfg);
    CHECK(sdw.nonuniformity >= 1e-3);
}

TEST_CASE("1x1 sweep equals classify at that point") {
    SweepConfig cfg;
    cfg.first = {"jx", 5.0, 5.0, 1};
    cfg.second = {"jy", 1.1, 1.1, 1};
    cfg.classify = quick();
    const auto d = sweep(cfg);
    REQUIRE(d.points.size() == 1);
    REQUIRE(d.points[0].has_value());
    ClassifyConfig cc = cfg.classify;
    cc.lyapunov.seed = cfg.point_seed(0);
    const auto l = classify({5.0, 1.1, 1, 1}, kGeom, EquatorPhase{}, cc);
    CHECK(d.points[0]->phase == l.phase);
    CHECK(d.points[0]->amplitude == l.amplitude);
    CHECK(d.points[0]->nonuniformity == l.nonuniformity);
}

TEST_CASE("jy=1.1 row goes SDW -> LC -> Chaos with an LC point in [8, 12]") {
    SweepConfig cfg;
    cfg.first = {"jx", 4.0, 16.0, 25};
    cfg.second = {"jy", 1.1, 1.1, 1};
    cfg.classify = quick();
    const auto d = sweep(cfg);
    REQUIRE(d.complete());
    int first_sdw = -1, first_lc = -1, first_chaos = -1;
    bool lc_in_window = false;
    std::string row;
    for (int i = 0; i < 25; ++i) {
        const Phase p = d.points[static_cast<std::size_t>(i)]->phase;
        row += std::string(to_string(p)) + " ";
        const double jx = cfg.first.value(i);
        if (p == Phase::SDW && first_sdw < 0) first_sdw = i;
        if (p == Phase::LC && first_lc < 0) first_lc = i;
        if (p == Phase::Chaos && first_chaos < 0) first_chaos = i;
        if (p == Phase::LC && jx >= 8.0 && jx <= 12.0) lc_in_window = true;
    }
    MESSAGE(row);
    CHECK(first_sdw >= 0);
    CHECK(first_sdw < first_lc);
    CHECK(first_lc < first_chaos);
    CHECK(lc_in_window);
}

TEST_CASE("interrupted and resumed sweep writes the same CSV as an uninterrupted one") {
    const auto dir = scratch("resume");
    SweepConfig full = small_grid(dir);
    full.checkpoint.clear();
    write_phase_csv(sweep(full), dir / "full.csv");

    SweepConfig part = small_grid(dir);
    part.max_new_points = 2;
    const auto first = sweep(part);
    CHECK_FALSE(first.complete());
    part.resume = true;
    part.max_new_points = 3;
    CHECK_FALSE(sweep(part).complete());
    part.max_new_points = 0;
    const auto done = sweep(part);
    REQUIRE(done.complete());
    write_phase_csv(done, dir / "resumed.csv");
    CHECK(slurp(dir / "full.csv") == slurp(dir / "resumed.csv"));

    std::ifstream header(dir / "full.csv");
    std::string line;
    std::getline(header, line);
    CHECK(line == "jx,jy,label,amplitude,nonuniformity,lambda,omega_p");
    std::filesystem::remove_all(dir);
}

TEST_CASE("parallel sweep equals serial sweep") {
    const auto dir = scratch("parallel");
    SweepConfig serial = small_grid(dir);
    serial.checkpoint.clear();
    SweepConfig parallel = serial;
    parallel.workers = 3;
    parallel.chunk_size = 4;
    write_phase_csv(sweep(serial), dir / "a.csv");
    write_phase_csv(sweep(parallel), dir / "b.csv");
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt or foreign checkpoints are refused") {
    const auto dir = scratch("corrupt");
    SweepConfig cfg = small_grid(dir);
    cfg.max_new_points = 2;
    sweep(cfg);
    const std::string good = slurp(cfg.checkpoint);
    cfg.resume = true;

    std::string bad = good;
    const auto pos = bad.find("\"amplitude\":");
    REQUIRE(pos != std::string::npos);
    bad[pos + 13] = bad[pos + 13] == '1' ? '2' : '1';
    std::ofstream(cfg.checkpoint, std::ios::binary) << bad;
    CHECK_THROWS_AS(sweep(cfg), CheckpointError);

    std::ofstream(cfg.checkpoint, std::ios::binary) << good.substr(0, good.size() / 2);
    CHECK_THROWS_AS(sweep(cfg), CheckpointError);

    std::ofstream(cfg.checkpoint, std::ios::binary) << good;
    SweepConfig other = cfg;
    other.base_seed = 5;
    CHECK_THROWS_AS(sweep(other), CheckpointError);

    cfg.resume = false;
    cfg.max_new_points = 0;
    CHECK(sweep(cfg).complete());
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep config validation and grid layout") {
    SweepConfig cfg;
    CHECK(cfg.point_count() == 240);
    CHECK(cfg.grid_coords(11) == std::pair<int, int>{1, 1});
    CHECK(cfg.params_at(0).jx == 1.0);
    CHECK(cfg.params_at(239).jx == doctest::Approx(15.0));
    CHECK(cfg.params_at(239).jy == doctest::Approx(1.6));
    CHECK(cfg.point_seed(3) != cfg.point_seed(4));
    cfg.first.steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.second.name = "jw";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.second.name = "jx";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(phase_from_string("XY"), std::invalid_argument);
    CHECK(phase_from_string("Chaos") == Phase::Chaos);
}
