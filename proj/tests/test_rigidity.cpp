#include "ctc/rigidity.hpp"

#include "doctest.h"

using namespace ctc;

TEST_CASE("staged schedule is quiet in stage I and seeded per stage") {
    RigidityConfig cfg;
    const auto s = staged_schedule(cfg, 7);
    CHECK(s.t_start() == 0.0);
    CHECK(s.t_end() == doctest::Approx(600.0));
    CHECK(s.size() == 60000);
    for (std::size_t k = 0; k < 20000; ++k) CHECK(s.offsets()[k] == 0.0);
    NoiseSpec ii;
    ii.beta = 0.04;
    ii.seed = derive_seed(7, 1);
    ii.t_start = 200.0;
    ii.t_end = 400.0;
    const auto expected = white_noise_schedule(ii);
    CHECK(std::equal(expected.offsets().begin(), expected.offsets().end(), s.offsets().begin() + 20000));
    CHECK(staged_schedule(cfg, 8).offsets() != s.offsets());
}

TEST_CASE("stage I against itself is exactly one; noiseless stages match a noiseless reference exactly") {
    RigidityConfig cfg;
    const auto run = run_rigidity(cfg, 0);
    REQUIRE(run.fractions.size() == 3);
    CHECK(run.fractions[0].omega_rcf == 1.0);
    CHECK(run.fractions[1].omega_rcf < 1.05);

    RigidityConfig quiet = cfg;
    quiet.stages = default_stages(0.0, 0.0);
    quiet.reference = QuietReference::same_window;
    for (const auto& f : run_rigidity(quiet, 3).fractions) CHECK(f.omega_rcf == 1.0);
}

TEST_CASE("summary statistics") {
    RigidityRun a, b;
    a.fractions = {{0, 1, 1, 1.0}, {0, 1, 1, 0.8}};
    b.fractions = {{0, 1, 1, 1.0}, {0, 1, 1, 0.6}};
    const auto s = summarize({a, b});
    CHECK(s.mean[0] == 1.0);
    CHECK(s.stddev[0] == 0.0);
    CHECK(s.mean[1] == doctest::Approx(0.7));
    CHECK(s.stddev[1] == doctest::Approx(0.1414213562).epsilon(1e-8));
}

TEST_CASE("invalid protocols") {
    RigidityConfig cfg;
    cfg.stages[0].beta = 0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.reference = QuietReference::same_window;
    CHECK_NOTHROW(cfg.validate());
    cfg = {};
    cfg.stages[1].t_start = 210.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.stages[2].window_a = 470.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.integrator.method = IntegratorMethod::rk45_adaptive;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
