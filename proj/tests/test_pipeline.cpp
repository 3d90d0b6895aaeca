#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "json.hpp"
#include "rkl/config.hpp"
#include "rkl/env.hpp"
#include "rkl/errors.hpp"
#include "rkl/pipeline.hpp"

using namespace rkl;

namespace {

// Small, fast episode setup shared by the run_* tests. LQR keeps the control
// stage cheap; the ridge keeps the 120-sample fit well posed at lift dim 19.
RunConfig small_cfg() {
    RunConfig cfg;
    cfg.controller = Controller::lqr;
    cfg.update_mode = UpdateMode::rkl;
    cfg.initial_steps = 120;
    cfg.episode_length = 60;
    cfg.diag_stride = 20;
    cfg.ridge = 1e-8;
    cfg.seeds = {1};
    return cfg;
}

} // namespace

TEST_CASE("run config defaults") {
    RunConfig cfg = RunConfig::from_config(ConfigMap::from_string(""));
    CHECK(cfg.controller == Controller::sac);
    CHECK(cfg.update_mode == UpdateMode::rkl);
    CHECK(cfg.initial_dataset == InitialData::random);
    CHECK(cfg.initial_steps == 500);
    CHECK(cfg.episode_length == 500);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1});
    CHECK(cfg.ridge == 0.0);
    CHECK(cfg.figure8_period == 5.0);
    CHECK(cfg.state_basis.kind == BasisKind::arm17);
    CHECK(cfg.control_basis.kind == BasisKind::identity);
    CHECK(cfg.control_basis.n_x == 2);
    CHECK(cfg.lqr.weight_pos == 200.0);
    CHECK(cfg.lqr.weight_u == 0.001);
    CHECK(cfg.lqr.dt == cfg.arm.dt);
    CHECK(cfg.sac.rbar.size() == 2);
    CHECK(cfg.sac.rbar[0] == 1e5);
    CHECK(cfg.sac.u_max == cfg.arm.u_max);
    CHECK_FALSE(cfg.concurrent_updates);
    CHECK(cfg.diag_stride == 100);
}

TEST_CASE("run config overrides and validation errors") {
    RunConfig cfg = RunConfig::from_config(ConfigMap::from_string(
        "controller = lqr\nupdate_mode = kl\ninitial_dataset = demo\n"
        "seeds = 3, 7\nridge = 1e-6\nelbow = up\nsac_rbar = 10, 20\n"));
    CHECK(cfg.controller == Controller::lqr);
    CHECK(cfg.update_mode == UpdateMode::kl);
    CHECK(cfg.initial_dataset == InitialData::demo);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 7});
    CHECK(cfg.elbow == Elbow::up);
    CHECK(cfg.sac.rbar[1] == 20.0);

    CHECK_THROWS_AS(
        (void)RunConfig::from_config(ConfigMap::from_string("controller = pid\n")),
        ConfigError);
    CHECK_THROWS_AS(
        (void)RunConfig::from_config(ConfigMap::from_string("elbow = sideways\n")),
        ConfigError);
    CHECK_THROWS_AS(
        (void)RunConfig::from_config(ConfigMap::from_string("initial_dataset = file\n")),
        ConfigError);
    CHECK_THROWS_AS((void)RunConfig::from_config(ConfigMap::from_string("ridge = -1\n")),
                    ConfigError);
    CHECK_THROWS_AS(
        (void)RunConfig::from_config(ConfigMap::from_string("episode_length = 0\n")),
        ConfigError);
    CHECK_THROWS_AS(
        (void)RunConfig::from_config(ConfigMap::from_string("diag_stride = 0\n")),
        ConfigError);

    RunConfig bad = small_cfg();
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("collect_random shapes, bounds, determinism") {
    ArmParams p;
    const int steps = 40;
    CollectedData a = collect_random(p, steps, 11);
    CHECK(a.t.size() == steps + 1);
    CHECK(a.x.size() == steps + 1);
    CHECK(a.u.size() == steps + 1);
    CHECK(a.dataset.size() == steps);
    CHECK(a.dataset.n_x == 4);
    CHECK(a.dataset.n_u == 2);
    CHECK(a.dataset.dt == p.dt);
    CHECK(a.u.back().norm() == 0.0);
    for (std::size_t k = 0; k < a.t.size(); ++k)
        CHECK(a.t[k] == doctest::Approx(k * p.dt));
    for (const auto& u : a.u) CHECK(u.cwiseAbs().maxCoeff() <= p.u_max);

    CollectedData b = collect_random(p, steps, 11);
    for (int k = 0; k <= steps; ++k) CHECK((a.x[k] - b.x[k]).norm() == 0.0);
    CollectedData c = collect_random(p, steps, 12);
    CHECK((a.x[1] - c.x[1]).norm() > 0.0);

    // Dataset rows chain: x_next of record k equals x of record k+1.
    for (int k = 0; k + 1 < steps; ++k)
        CHECK((a.dataset.records[k].x_next - a.dataset.records[k + 1].x).norm() == 0.0);
}

TEST_CASE("collect_demo clamps torque and tracks the reference") {
    ArmParams p;
    const int steps = 500; // one figure-eight period at dt = 0.01
    CollectedData demo = collect_demo(p, steps, 5.0, 1.0, 0.1, 5, Elbow::down);
    CHECK(demo.t.size() == steps + 1);
    CHECK(demo.dataset.size() == steps);
    for (const auto& u : demo.u) CHECK(u.cwiseAbs().maxCoeff() <= p.u_max + 1e-15);

    const auto refs = reference_joint_traj(5.0, p.dt, p, Elbow::down);
    auto joint_err_tail = [&](const CollectedData& d) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = steps / 2; k < steps; ++k) {
            const Eigen::Vector2d q(d.x[k][0], d.x[k][1]);
            acc += (refs[std::min<std::size_t>(k, refs.size() - 1)].q_d - q).norm();
            ++cnt;
        }
        return acc / cnt;
    };
    CollectedData rnd = collect_random(p, steps, 5);
    // PD demo settles onto the joint reference; random torques wander.
    CHECK(joint_err_tail(demo) < 0.5 * joint_err_tail(rnd));

    CollectedData demo2 = collect_demo(p, steps, 5.0, 1.0, 0.1, 5, Elbow::down);
    CHECK((demo.x.back() - demo2.x.back()).norm() == 0.0);
}

TEST_CASE("collect_initial honors the configured source") {
    RunConfig cfg = small_cfg();
    cfg.initial_steps = 30;
    CollectedData r = collect_initial(cfg, 9);
    CollectedData r2 = collect_random(cfg.arm, 30, 9);
    CHECK((r.x.back() - r2.x.back()).norm() == 0.0);

    cfg.initial_dataset = InitialData::demo;
    CollectedData d = collect_initial(cfg, 9);
    CHECK((d.x.back() - r.x.back()).norm() > 0.0);
}

TEST_CASE("episode bookkeeping in lock-step recursive mode") {
    RunConfig cfg = small_cfg();
    SeedResult res = run_episode(cfg, 1);
    CHECK(res.seed == 1);
    CHECK(static_cast<int>(res.tip.size()) == cfg.episode_length);
    CHECK(res.tip_ref.size() == res.tip.size());
    CHECK(res.updates_applied == static_cast<std::uint64_t>(cfg.episode_length));
    // One Gramian sample at step 0 plus one per diag_stride steps.
    CHECK(static_cast<int>(res.gramian.size()) == 1 + cfg.episode_length / cfg.diag_stride);
    CHECK(res.gramian.front().step == 0);
    CHECK(res.gramian.back().step == cfg.episode_length);
    for (const auto& g : res.gramian) {
        CHECK(g.rank > 0);
        CHECK(g.cond >= 1.0);
    }
    CHECK(std::isfinite(res.rmse));
    CHECK(res.rmse > 0.0);
    CHECK(std::isfinite(res.frechet));
    CHECK(res.frechet >= res.rmse); // max-type vs mean-type deviation
    CHECK(res.saturation_rate >= 0.0);
    CHECK(res.saturation_rate <= 1.0);
    CHECK(res.mean_reward < 0.0); // reward is a negative tracking penalty

    SeedResult again = run_episode(cfg, 1);
    CHECK(again.rmse == res.rmse);
    CHECK(again.time_lag == res.time_lag);
    for (std::size_t k = 0; k < res.tip.size(); ++k)
        CHECK((res.tip[k] - again.tip[k]).norm() == 0.0);
}

TEST_CASE("episode without updates keeps the initial model") {
    RunConfig cfg = small_cfg();
    cfg.update_mode = UpdateMode::kl;
    SeedResult res = run_episode(cfg, 1);
    CHECK(res.updates_applied == 0);
    CHECK(res.gramian.size() == 1);
    CHECK(std::isfinite(res.rmse));
}

TEST_CASE("episode with snapshot handoff applies every queued update") {
    RunConfig cfg = small_cfg();
    cfg.concurrent_updates = true;
    SeedResult res = run_episode(cfg, 1);
    CHECK(res.updates_applied == static_cast<std::uint64_t>(cfg.episode_length));
    // Diagnostics reduce to the initial sample and the post-drain one.
    CHECK(res.gramian.size() == 2);
    CHECK(res.gramian.back().step == cfg.episode_length);
    CHECK(std::isfinite(res.rmse));
    CHECK(res.rmse > 0.0);
}

TEST_CASE("experiment aggregates match per-seed results") {
    setenv("RKL_THREADS", "1", 1);
    RunConfig cfg = small_cfg();
    cfg.seeds = {1, 2, 3};
    EvalReport rep = run_experiment(cfg);
    CHECK(rep.per_seed.size() == 3);
    CHECK(rep.controller == "lqr");
    CHECK(rep.update_mode == "rkl");
    for (std::size_t i = 0; i < 3; ++i) CHECK(rep.per_seed[i].seed == cfg.seeds[i]);

    // The pool shares nothing across seeds: each entry equals a solo run.
    SeedResult solo = run_episode(cfg, 2);
    CHECK(rep.per_seed[1].rmse == solo.rmse);
    CHECK(rep.per_seed[1].frechet == solo.frechet);

    std::vector<double> r;
    for (const auto& s : rep.per_seed) r.push_back(s.rmse);
    CHECK(rep.rmse_mean == doctest::Approx(mean_of(r)).epsilon(1e-15));
    CHECK(rep.rmse_std == doctest::Approx(stddev_of(r)).epsilon(1e-12));
    CHECK(rep.timing.count("total_s") == 1);
    CHECK(rep.timing.at("total_s") > 0.0);
    unsetenv("RKL_THREADS");
}

TEST_CASE("experiment report is reproducible up to wall-clock timing") {
    setenv("RKL_THREADS", "1", 1);
    RunConfig cfg = small_cfg();
    cfg.episode_length = 30;
    cfg.seeds = {4, 5};
    nlohmann::json a = nlohmann::json::parse(run_experiment(cfg).to_json());
    nlohmann::json b = nlohmann::json::parse(run_experiment(cfg).to_json());
    CHECK(a.contains("timing"));
    CHECK(a["per_seed"].size() == 2);
    CHECK(a["per_seed"][0]["tip"].size() == 30);
    a.erase("timing");
    b.erase("timing");
    CHECK(a.dump() == b.dump());
    unsetenv("RKL_THREADS");
}

TEST_CASE("experiment surfaces a per-seed failure with its seed") {
    RunConfig cfg = small_cfg();
    cfg.ridge = 0.0;
    cfg.initial_steps = 5; // 5 samples cannot span a 19-dim lift
    CHECK_THROWS_AS((void)run_experiment(cfg), NumericalError);
}

TEST_CASE("mean and stddev helpers") {
    CHECK(mean_of({1.0, 2.0, 3.0}) == doctest::Approx(2.0));
    CHECK(stddev_of({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
    CHECK(mean_of({}) == 0.0);
    CHECK(stddev_of({5.0}) == 0.0);
}

TEST_CASE("identity-basis chain limit equals the transition matrix") {
    ChainSpec spec;
    spec.n = 3;
    spec.A = random_stable_matrix(3, 0.8, 21);
    spec.noise_cov = 0.1 * Eigen::MatrixXd::Identity(3, 3);
    spec.seed = 21;
    const Eigen::MatrixXd K = chain_koopman_limit(spec, BasisSpec::identity(3), 100);
    CHECK((K - spec.A).norm() <= 1e-12);
}

TEST_CASE("monte-carlo chain limit matches stationary moments in closed form") {
    // Scalar chain x' = a x + w with stationary variance 1. Lifting to
    // (x, x^2) the limit map is diag(a, a^2 + q/3): odd moments vanish and
    // E[x'^2 x^2] / E[x^4] = (3 a^2 + q) / 3.
    const double a = 0.6;
    const double q = 1.0 - a * a;
    ChainSpec spec;
    spec.n = 1;
    spec.A = Eigen::MatrixXd::Constant(1, 1, a);
    spec.noise_cov = Eigen::MatrixXd::Constant(1, 1, q);
    spec.seed = 7;
    const Eigen::MatrixXd K = chain_koopman_limit(spec, BasisSpec::polynomial(1, 2), 2000000);
    REQUIRE(K.rows() == 2);
    CHECK(K(0, 0) == doctest::Approx(a).epsilon(0.02));
    CHECK(std::abs(K(0, 1)) < 0.02);
    CHECK(std::abs(K(1, 0)) < 0.05);
    CHECK(K(1, 1) == doctest::Approx(a * a + q / 3.0).epsilon(0.05));
}

TEST_CASE("convergence errors shrink with the sample count") {
    ChainSpec spec;
    spec.n = 2;
    spec.A = random_stable_matrix(2, 0.7, 3);
    spec.noise_cov = 0.05 * Eigen::MatrixXd::Identity(2, 2);
    spec.seed = 3;
    // Unsorted checkpoints come back sorted.
    const auto pts =
        convergence_experiment(spec, BasisSpec::identity(2), {20000, 500}, 0.0, 100);
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].N == 500);
    CHECK(pts[1].N == 20000);
    CHECK_FALSE(pts[0].rank_deficient);
    CHECK_FALSE(pts[1].rank_deficient);
    CHECK(pts[0].error > 0.0);
    CHECK(pts[1].error < pts[0].error);
}

TEST_CASE("convergence marks rank-deficient checkpoints and still reports") {
    ChainSpec spec;
    spec.n = 2;
    spec.A = random_stable_matrix(2, 0.7, 3);
    spec.noise_cov = 0.05 * Eigen::MatrixXd::Identity(2, 2);
    spec.seed = 3;
    // One sample cannot span two moments; the fallback ridge still yields a value.
    const auto pts = convergence_experiment(spec, BasisSpec::identity(2), {1}, 0.0, 100);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].rank_deficient);
    CHECK(std::isfinite(pts[0].error));

    CHECK_THROWS_AS((void)convergence_experiment(spec, BasisSpec::identity(2), {}, 0.0, 100),
                    ConfigError);
    CHECK_THROWS_AS((void)convergence_experiment(spec, BasisSpec::identity(2), {0}, 0.0, 100),
                    ConfigError);
}

TEST_CASE("timing experiment emits one row per axis point") {
    const auto rows = timing_experiment({4}, {50, 200}, 50);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].dim == 4);
    CHECK(rows[0].dataset_size == 50);
    CHECK(rows[1].dataset_size == 200);
    for (const auto& r : rows) {
        CHECK(r.rls_update_us > 0.0);
        CHECK(r.edmd_retrain_s > 0.0);
    }
    CHECK_THROWS_AS((void)timing_experiment({}, {50}, 10), ConfigError);
    CHECK_THROWS_AS((void)timing_experiment({4}, {50}, 0), ConfigError);
}
