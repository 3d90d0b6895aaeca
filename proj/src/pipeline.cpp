#include "rkl/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <thread>

#include "json.hpp"
#include "rkl/errors.hpp"
#include "rkl/model_io.hpp"
#include "rkl/rls.hpp"

namespace rkl {

using json = nlohmann::ordered_json;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

} // namespace

std::string to_string(Controller c) { return c == Controller::sac ? "sac" : "lqr"; }
std::string to_string(UpdateMode m) { return m == UpdateMode::rkl ? "rkl" : "kl"; }
std::string to_string(InitialData d) {
    switch (d) {
        case InitialData::random: return "random";
        case InitialData::demo: return "demo";
        default: return "file";
    }
}

namespace {

Controller controller_from(const std::string& s) {
    if (s == "sac") return Controller::sac;
    if (s == "lqr") return Controller::lqr;
    throw ConfigError("controller must be 'sac' or 'lqr', got '" + s + "'");
}

UpdateMode update_mode_from(const std::string& s) {
    if (s == "rkl") return UpdateMode::rkl;
    if (s == "kl") return UpdateMode::kl;
    throw ConfigError("update_mode must be 'rkl' or 'kl', got '" + s + "'");
}

InitialData initial_from(const std::string& s) {
    if (s == "random") return InitialData::random;
    if (s == "demo") return InitialData::demo;
    if (s == "file") return InitialData::file;
    throw ConfigError("initial_dataset must be 'random', 'demo' or 'file', got '" + s + "'");
}

BasisSpec state_basis_from(const ConfigMap& cfg, int n_x) {
    const std::string kind = cfg.get_string("state_basis", "arm17");
    if (kind == "arm17") return BasisSpec::arm17();
    if (kind == "identity") return BasisSpec::identity(n_x);
    if (kind == "polynomial")
        return BasisSpec::polynomial(n_x, cfg.get_int("poly_degree", 3));
    if (kind == "gaussian_rbf") {
        const auto lo_v = cfg.get_double_list("rbf_lo");
        const auto hi_v = cfg.get_double_list("rbf_hi");
        const auto cnt = cfg.get_int_list("rbf_count");
        if (static_cast<int>(lo_v.size()) != n_x || hi_v.size() != lo_v.size() ||
            cnt.size() != lo_v.size())
            throw ConfigError("rbf_lo/rbf_hi/rbf_count must each have n_x entries");
        Eigen::VectorXd lo = Eigen::Map<const Eigen::VectorXd>(lo_v.data(), n_x);
        Eigen::VectorXd hi = Eigen::Map<const Eigen::VectorXd>(hi_v.data(), n_x);
        const Eigen::MatrixXd centers = rbf_grid_centers(lo, hi, cnt);
        return BasisSpec::gaussian_rbf(centers, cfg.get_double("rbf_epsilon", 1.0));
    }
    throw ConfigError("unknown state_basis '" + kind + "'");
}

} // namespace

RunConfig RunConfig::from_config(const ConfigMap& cfg) {
    RunConfig rc;
    rc.arm.l1 = cfg.get_double("l1", rc.arm.l1);
    rc.arm.l2 = cfg.get_double("l2", rc.arm.l2);
    rc.arm.m1 = cfg.get_double("m1", rc.arm.m1);
    rc.arm.m2 = cfg.get_double("m2", rc.arm.m2);
    rc.arm.damping = cfg.get_double("damping", rc.arm.damping);
    rc.arm.u_max = cfg.get_double("u_max", rc.arm.u_max);
    rc.arm.dt = cfg.get_double("dt", rc.arm.dt);

    rc.state_basis = state_basis_from(cfg, 4);
    rc.control_basis = BasisSpec::identity(2);

    rc.controller = controller_from(cfg.get_string("controller", "sac"));
    rc.update_mode = update_mode_from(cfg.get_string("update_mode", "rkl"));
    rc.initial_dataset = initial_from(cfg.get_string("initial_dataset", "random"));
    rc.initial_steps = cfg.get_int("initial_steps", 500);
    rc.initial_path = cfg.get_string("initial_path", "");
    rc.episode_length = cfg.get_int("episode_length", 500);
    if (cfg.has("seeds")) rc.seeds = cfg.get_u64_list("seeds");
    rc.ridge = cfg.get_double("ridge", 0.0);
    rc.figure8_period = cfg.get_double("figure8_period", 5.0);
    const std::string elbow = cfg.get_string("elbow", "down");
    if (elbow != "down" && elbow != "up")
        throw ConfigError("elbow must be 'down' or 'up', got '" + elbow + "'");
    rc.elbow = elbow == "down" ? Elbow::down : Elbow::up;
    rc.demo_kp = cfg.get_double("demo_kp", 1.0);
    rc.demo_kd = cfg.get_double("demo_kd", 0.1);

    rc.lqr.weight_pos = cfg.get_double("lqr_weight_pos", 200.0);
    rc.lqr.weight_vel = cfg.get_double("lqr_weight_vel", 30.0);
    rc.lqr.weight_obs = cfg.get_double("lqr_weight_obs", 1.0);
    rc.lqr.weight_u = cfg.get_double("lqr_weight_u", 0.001);
    rc.lqr.weight_terminal = cfg.get_double("lqr_weight_terminal", 0.0);
    rc.lqr.horizon = cfg.get_double("lqr_horizon", 0.16);
    rc.lqr.dt = rc.arm.dt;

    rc.sac.horizon = cfg.get_double("sac_horizon", 0.16);
    rc.sac.dt = rc.arm.dt;
    rc.sac.nominal = rc.lqr;
    rc.sac.u_max = rc.arm.u_max;
    std::vector<double> rbar = cfg.has("sac_rbar") ? cfg.get_double_list("sac_rbar")
                                                   : std::vector<double>{1e5};
    if (rbar.size() == 1) rbar.resize(2, rbar[0]);
    rc.sac.rbar = Eigen::Map<const Eigen::VectorXd>(rbar.data(),
                                                    static_cast<Eigen::Index>(rbar.size()));

    rc.concurrent_updates = cfg.get_bool("concurrent_updates", false);
    rc.diag_stride = cfg.get_int("diag_stride", 100);
    rc.echo = cfg.echo_line();
    rc.validate();
    return rc;
}

void RunConfig::validate() const {
    arm.validate();
    if (episode_length < 1) throw ConfigError("episode_length must be at least 1");
    if (initial_steps < 1 && initial_dataset != InitialData::file)
        throw ConfigError("initial_steps must be at least 1");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (ridge < 0) throw ConfigError("ridge must be non-negative");
    if (!(figure8_period > 0)) throw ConfigError("figure8_period must be positive");
    if (diag_stride < 1) throw ConfigError("diag_stride must be at least 1");
    if (initial_dataset == InitialData::file && initial_path.empty())
        throw ConfigError("initial_dataset=file requires initial_path");
    lqr.validate();
    if (controller == Controller::sac) sac.validate();
}

namespace {

CollectedData collect_random_rng(const ArmParams& p, int steps, std::mt19937_64& rng) {
    p.validate();
    if (steps < 1) throw ConfigError("collect: steps must be at least 1");
    std::uniform_real_distribution<double> du(-p.u_max, p.u_max);

    CollectedData out;
    out.t.reserve(steps + 1);
    out.x.reserve(steps + 1);
    out.u.reserve(steps + 1);
    ArmState s = sample_arm_init(rng);
    for (int k = 0; k < steps; ++k) {
        const Eigen::Vector2d u(du(rng), du(rng));
        out.t.push_back(k * p.dt);
        out.x.push_back(s.as_vector());
        out.u.push_back(u);
        s = arm_step(s, u, p);
    }
    out.t.push_back(steps * p.dt);
    out.x.push_back(s.as_vector());
    out.u.push_back(Eigen::Vector2d::Zero()); // final row's control is ignored downstream
    out.dataset = dataset_from_trajectory(out.t, out.x, out.u);
    return out;
}

CollectedData collect_demo_rng(const ArmParams& p, int steps, double figure8_period, double kp,
                               double kd, std::mt19937_64& rng, Elbow elbow) {
    p.validate();
    if (steps < 1) throw ConfigError("collect: steps must be at least 1");
    const auto refs = reference_joint_traj(figure8_period, p.dt, p, elbow);
    const int n_ref = static_cast<int>(refs.size());

    CollectedData out;
    out.t.reserve(steps + 1);
    out.x.reserve(steps + 1);
    out.u.reserve(steps + 1);
    ArmState s = sample_arm_init(rng);
    for (int k = 0; k < steps; ++k) {
        const JointReference& r = refs[std::min(k, n_ref - 1)];
        Eigen::Vector2d u = kp * (r.q_d - s.q) + kd * (r.qdot_d - s.qdot);
        u = u.cwiseMax(-p.u_max).cwiseMin(p.u_max);
        out.t.push_back(k * p.dt);
        out.x.push_back(s.as_vector());
        out.u.push_back(u);
        s = arm_step(s, u, p);
    }
    out.t.push_back(steps * p.dt);
    out.x.push_back(s.as_vector());
    out.u.push_back(Eigen::Vector2d::Zero());
    out.dataset = dataset_from_trajectory(out.t, out.x, out.u);
    return out;
}

} // namespace

CollectedData collect_random(const ArmParams& p, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return collect_random_rng(p, steps, rng);
}

CollectedData collect_demo(const ArmParams& p, int steps, double figure8_period, double kp,
                           double kd, std::uint64_t seed, Elbow elbow) {
    std::mt19937_64 rng(seed);
    return collect_demo_rng(p, steps, figure8_period, kp, kd, rng, elbow);
}

CollectedData collect_initial(const RunConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    switch (cfg.initial_dataset) {
        case InitialData::random: return collect_random_rng(cfg.arm, cfg.initial_steps, rng);
        case InitialData::demo:
            return collect_demo_rng(cfg.arm, cfg.initial_steps, cfg.figure8_period, cfg.demo_kp,
                                    cfg.demo_kd, rng, cfg.elbow);
        case InitialData::file: {
            CollectedData out;
            const TrajectoryFile f = load_trajectory_csv(cfg.initial_path);
            out.t = f.t;
            out.x = f.x;
            out.u = f.u;
            out.dataset = dataset_from_trajectory(f.t, f.x, f.u);
            return out;
        }
    }
    throw ConfigError("collect_initial: unknown mode");
}

namespace {

struct StageTimes {
    double collect = 0, fit = 0, control = 0, env = 0, update = 0;
};

GramianSample gramian_sample(int step, const Eigen::MatrixXd& P) {
    // cond(P) equals cond of the Gramian it inverts.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
    const Eigen::VectorXd& sv = svd.singularValues();
    GramianSample g;
    g.step = step;
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    g.cond = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > smax * 1e-10) ++g.rank;
    return g;
}

// Lock-step RKL updater plus its snapshot-handoff variant. In handoff mode an
// updater thread owns the RLS state; the control loop keeps using its last
// model snapshot until a fresher one has been published.
class EpisodeUpdater {
  public:
    EpisodeUpdater(KoopmanModel& work, bool concurrent)
        : work_(work), rls_(work), concurrent_(concurrent) {
        if (concurrent_) worker_ = std::thread([this] { run(); });
    }

    ~EpisodeUpdater() { finish(); }

    void push(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
        if (!concurrent_) {
            rls_.update(alpha, beta);
            work_.K = rls_.K();
            return;
        }
        {
            std::lock_guard lock(mu_);
            queue_.emplace_back(alpha, beta);
        }
        cv_.notify_one();
    }

    // Adopt the freshest published model, if any (concurrent mode only).
    void refresh() {
        if (!concurrent_) return;
        if (auto latest = handoff_.take()) work_.K = latest->K;
    }

    void finish() {
        if (concurrent_ && worker_.joinable()) {
            {
                std::lock_guard lock(mu_);
                done_ = true;
            }
            cv_.notify_one();
            worker_.join();
            work_.K = rls_.K(); // final drain is complete once joined
        }
    }

    std::uint64_t updates_applied() const { return rls_.update_count(); }
    const RlsState& rls() const { return rls_; }

  private:
    void run() {
        for (;;) {
            std::pair<Eigen::VectorXd, Eigen::VectorXd> item;
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, [this] { return done_ || !queue_.empty(); });
                if (queue_.empty()) return;
                item = std::move(queue_.front());
                queue_.pop_front();
            }
            rls_.update(item.first, item.second);
            KoopmanModel snap = work_;
            snap.K = rls_.K();
            snap.P = rls_.P();
            handoff_.publish(snap);
        }
    }

    KoopmanModel& work_;
    RlsState rls_;
    bool concurrent_;
    ModelHandoff handoff_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> queue_;
    bool done_ = false;
    std::thread worker_;
};

SeedResult run_episode_timed(const RunConfig& cfg, std::uint64_t seed, StageTimes* times) {
    cfg.validate();
    StageTimes local;
    StageTimes& st = times ? *times : local;
    std::mt19937_64 rng(seed);

    auto t0 = clock_type::now();
    CollectedData init = [&] {
        if (cfg.initial_dataset == InitialData::file) {
            CollectedData out;
            const TrajectoryFile f = load_trajectory_csv(cfg.initial_path);
            out.t = f.t;
            out.x = f.x;
            out.u = f.u;
            out.dataset = dataset_from_trajectory(f.t, f.x, f.u);
            return out;
        }
        return cfg.initial_dataset == InitialData::random
                   ? collect_random_rng(cfg.arm, cfg.initial_steps, rng)
                   : collect_demo_rng(cfg.arm, cfg.initial_steps, cfg.figure8_period, cfg.demo_kp,
                                      cfg.demo_kd, rng, cfg.elbow);
    }();
    st.collect += seconds_since(t0);

    t0 = clock_type::now();
    const Basis phi = Basis::make(cfg.state_basis);
    const Basis psi = Basis::make(cfg.control_basis);
    Eigen::MatrixXd Y, Ybar;
    assemble_snapshots(init.dataset, phi, &psi, Y, Ybar);
    KoopmanModel model = fit_edmd(Y, Ybar, phi.output_dim(), cfg.ridge);
    model.state_basis = cfg.state_basis;
    model.control_basis = cfg.control_basis;
    model.has_control = true;
    model.dt = init.dataset.dt;
    st.fit += seconds_since(t0);

    const int n_z = model.n_z;
    const int L = cfg.episode_length;
    const double dt = cfg.arm.dt;

    // Lifted reference cache over one figure-eight period.
    const auto refs = reference_joint_traj(cfg.figure8_period, dt, cfg.arm, cfg.elbow);
    const int n_ref = static_cast<int>(refs.size());
    Eigen::MatrixXd z_ref_all(n_z, n_ref);
    for (int j = 0; j < n_ref; ++j) {
        Eigen::Vector4d xr;
        xr << refs[j].q_d, refs[j].qdot_d;
        z_ref_all.col(j) = phi.lift(xr);
    }
    const auto ref_index = [&](int k) { return std::min(k, n_ref - 1); };

    const int H = cfg.controller == Controller::sac ? cfg.sac.steps() : 1;
    Eigen::MatrixXd window(n_z, H);
    const Eigen::VectorXd u_ref = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd warm_P;
    const LqrConfig& nom_cfg = cfg.controller == Controller::sac ? cfg.sac.nominal : cfg.lqr;
    Eigen::MatrixXd held_gain; // last gain that solved; reused across Riccati stalls

    SeedResult res;
    res.seed = seed;
    res.tip.reserve(L);
    res.tip_ref.reserve(L);
    res.gramian.push_back(gramian_sample(0, model.P));

    // Evaluation starts on the reference; random poses are for data collection.
    ArmState s;
    s.q = refs[0].q_d;
    s.qdot = refs[0].qdot_d;
    KoopmanModel work = model;
    const bool recursive = cfg.update_mode == UpdateMode::rkl;
    EpisodeUpdater updater(work, recursive && cfg.concurrent_updates);

    int saturated_steps = 0;
    double reward_acc = 0.0;
    Eigen::VectorXd alpha(n_z + 2), beta(n_z + 2);

    for (int k = 0; k < L; ++k) {
        if (recursive) updater.refresh();

        auto tc = clock_type::now();
        const Eigen::VectorXd z = phi.lift(s.as_vector());
        for (int j = 0; j < H; ++j) window.col(j) = z_ref_all.col(ref_index(k + 1 + j));

        // Interim models can stall the Riccati iteration (residual plateaus
        // above tolerance). Reusing the previous gain keeps the episode
        // alive; the next model update usually restores solvability. The
        // initial model has no fallback, so a step-0 stall still throws.
        LqrPolicy policy;
        try {
            policy = lqr_nominal(to_continuous(work), nom_cfg, cfg.state_basis, window, u_ref,
                                 &warm_P);
            held_gain = -policy.dmu_dz();
        } catch (const NumericalError&) {
            if (held_gain.size() == 0) throw;
            policy = LqrPolicy(held_gain, window, u_ref);
            ++res.gain_holds;
        }

        Eigen::Vector2d u;
        if (cfg.controller == Controller::sac) {
            const SacResult sac = sac_action(work, z, window, u_ref, cfg.sac, nullptr, &policy);
            u = sac.u;
            if (sac.saturated) ++saturated_steps;
        } else {
            const Eigen::VectorXd raw = policy.mu(z, 0);
            u = raw.cwiseMax(-cfg.arm.u_max).cwiseMin(cfg.arm.u_max);
            if ((u - raw).cwiseAbs().maxCoeff() > 0) ++saturated_steps;
        }
        st.control += seconds_since(tc);

        res.tip.push_back(arm_fk(s.q, cfg.arm));
        res.tip_ref.push_back(figure8_reference(ref_index(k) * dt, cfg.figure8_period));
        reward_acc += arm_reward(s, u, refs[ref_index(k)].q_d, refs[ref_index(k)].qdot_d);

        tc = clock_type::now();
        const ArmState s_next = arm_step(s, u, cfg.arm);
        st.env += seconds_since(tc);

        if (recursive) {
            tc = clock_type::now();
            alpha << z, u;
            beta << phi.lift(s_next.as_vector()), u;
            updater.push(alpha, beta);
            st.update += seconds_since(tc);
            if (!cfg.concurrent_updates && (k + 1) % cfg.diag_stride == 0)
                res.gramian.push_back(gramian_sample(k + 1, updater.rls().P()));
        }
        s = s_next;
    }
    updater.finish();
    if (recursive && cfg.concurrent_updates)
        res.gramian.push_back(gramian_sample(L, updater.rls().P()));

    res.updates_applied = updater.updates_applied();
    res.saturation_rate = static_cast<double>(saturated_steps) / L;
    res.mean_reward = reward_acc / L;
    res.rmse = rmse(res.tip, res.tip_ref);
    res.time_lag = time_lag(res.tip, res.tip_ref, dt);
    res.frechet = frechet_distance(res.tip, res.tip_ref);
    return res;
}

} // namespace

SeedResult run_episode(const RunConfig& cfg, std::uint64_t seed) {
    return run_episode_timed(cfg, seed, nullptr);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

int thread_cap() {
    if (const char* env = std::getenv("RKL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

EvalReport run_experiment(const RunConfig& cfg) {
    cfg.validate();
    const auto t_total = clock_type::now();

    const int n = static_cast<int>(cfg.seeds.size());
    std::vector<SeedResult> results(n);
    std::vector<StageTimes> stage_times(n);
    std::vector<std::string> failures(n);

    const int workers = std::min(thread_cap(), n);
    std::atomic<int> next{0};
    auto body = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                results[i] = run_episode_timed(cfg, cfg.seeds[i], &stage_times[i]);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(body);
        for (auto& th : pool) th.join();
    }
    for (int i = 0; i < n; ++i)
        if (!failures[i].empty())
            throw NumericalError("seed " + std::to_string(cfg.seeds[i]) + ": " + failures[i]);

    EvalReport rep;
    rep.config_echo = cfg.echo;
    rep.controller = to_string(cfg.controller);
    rep.update_mode = to_string(cfg.update_mode);
    rep.per_seed = std::move(results);

    std::vector<double> v_rmse, v_lag, v_frechet, v_sat, v_reward;
    for (const SeedResult& r : rep.per_seed) {
        v_rmse.push_back(r.rmse);
        v_lag.push_back(r.time_lag);
        v_frechet.push_back(r.frechet);
        v_sat.push_back(r.saturation_rate);
        v_reward.push_back(r.mean_reward);
    }
    rep.rmse_mean = mean_of(v_rmse);
    rep.rmse_std = stddev_of(v_rmse);
    rep.time_lag_mean = mean_of(v_lag);
    rep.time_lag_std = stddev_of(v_lag);
    rep.frechet_mean = mean_of(v_frechet);
    rep.frechet_std = stddev_of(v_frechet);
    rep.saturation_rate_mean = mean_of(v_sat);
    rep.mean_reward_mean = mean_of(v_reward);

    StageTimes sum;
    for (const StageTimes& t : stage_times) {
        sum.collect += t.collect;
        sum.fit += t.fit;
        sum.control += t.control;
        sum.env += t.env;
        sum.update += t.update;
    }
    rep.timing["collect_s"] = sum.collect;
    rep.timing["fit_s"] = sum.fit;
    rep.timing["control_s"] = sum.control;
    rep.timing["env_s"] = sum.env;
    rep.timing["update_s"] = sum.update;
    rep.timing["total_s"] = seconds_since(t_total);
    return rep;
}

std::string EvalReport::to_json(int indent) const {
    json j;
    j["format_version"] = 1;
    j["config"] = config_echo;
    j["controller"] = controller;
    j["update_mode"] = update_mode;
    j["aggregate"] = {{"rmse_mean", rmse_mean},
                      {"rmse_std", rmse_std},
                      {"time_lag_mean", time_lag_mean},
                      {"time_lag_std", time_lag_std},
                      {"frechet_mean", frechet_mean},
                      {"frechet_std", frechet_std},
                      {"saturation_rate_mean", saturation_rate_mean},
                      {"mean_reward_mean", mean_reward_mean}};
    j["per_seed"] = json::array();
    for (const SeedResult& r : per_seed) {
        json s;
        s["seed"] = r.seed;
        s["rmse"] = r.rmse;
        s["time_lag"] = r.time_lag;
        s["frechet"] = r.frechet;
        s["saturation_rate"] = r.saturation_rate;
        s["mean_reward"] = r.mean_reward;
        s["updates_applied"] = r.updates_applied;
        s["gain_holds"] = r.gain_holds;
        s["gramian"] = json::array();
        for (const GramianSample& g : r.gramian)
            s["gramian"].push_back({{"step", g.step}, {"cond", g.cond}, {"rank", g.rank}});
        s["tip"] = json::array();
        for (const auto& p : r.tip) s["tip"].push_back({p[0], p[1]});
        s["tip_ref"] = json::array();
        for (const auto& p : r.tip_ref) s["tip_ref"].push_back({p[0], p[1]});
        j["per_seed"].push_back(std::move(s));
    }
    j["timing"] = timing;
    return j.dump(indent);
}

// --- Convergence experiment ---

Eigen::MatrixXd chain_koopman_limit(const ChainSpec& spec, const BasisSpec& basis,
                                    std::uint64_t mc_samples) {
    spec.validate();
    if (basis.n_x != spec.n) throw ConfigError("chain_koopman_limit: basis n_x must equal chain n");

    if (basis.kind == BasisKind::identity) {
        // Stationary moments in closed form: E[x' x^T] = A Sigma, E[x x^T] = Sigma.
        const Eigen::MatrixXd Sigma = lyapunov_stationary_cov(spec.A, spec.noise_cov);
        const Eigen::MatrixXd Qm = spec.A * Sigma;
        return Sigma.ldlt().solve(Qm.transpose()).transpose();
    }

    // Monte Carlo oracle on an independent stream (fixed xor keeps it
    // decoupled from the experiment's own chain at the same seed).
    const Basis phi = Basis::make(basis);
    const int d = phi.output_dim();
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(spec.noise_cov).matrixL();
    std::mt19937_64 rng(spec.seed ^ 0x517cc1b727220a95ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd Qm = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.n), noise(spec.n);
    Eigen::VectorXd z = phi.lift(x), z_next(d);
    const std::uint64_t burn_in = 1000;
    for (std::uint64_t k = 0; k < mc_samples + burn_in; ++k) {
        for (int i = 0; i < spec.n; ++i) noise[i] = gauss(rng);
        const Eigen::VectorXd x_next = spec.A * x + L * noise;
        z_next = phi.lift(x_next);
        if (k >= burn_in) {
            G.noalias() += z * z.transpose();
            Qm.noalias() += z_next * z.transpose();
        }
        x = x_next;
        z.swap(z_next);
    }
    return fit_from_moments(G, Qm, d, 0.0).K;
}

std::vector<ConvergencePoint> convergence_experiment(const ChainSpec& spec, const BasisSpec& basis,
                                                     const std::vector<std::uint64_t>& checkpoints,
                                                     double ridge, std::uint64_t mc_samples) {
    spec.validate();
    if (checkpoints.empty()) throw ConfigError("convergence_experiment: no checkpoints");
    std::vector<std::uint64_t> cps = checkpoints;
    std::sort(cps.begin(), cps.end());
    if (cps.front() == 0) throw ConfigError("convergence_experiment: checkpoints must be >= 1");

    const Eigen::MatrixXd Kstar = chain_koopman_limit(spec, basis, mc_samples);
    const Basis phi = Basis::make(basis);
    const int d = phi.output_dim();

    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(spec.noise_cov).matrixL();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd Qm = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.n), noise(spec.n);
    Eigen::VectorXd z = phi.lift(x), z_next(d);

    std::vector<ConvergencePoint> out;
    std::size_t ci = 0;
    for (std::uint64_t N = 1; N <= cps.back(); ++N) {
        for (int i = 0; i < spec.n; ++i) noise[i] = gauss(rng);
        const Eigen::VectorXd x_next = spec.A * x + L * noise;
        z_next = phi.lift(x_next);
        G.noalias() += z * z.transpose();
        Qm.noalias() += z_next * z.transpose();
        x = x_next;
        z.swap(z_next);

        while (ci < cps.size() && N == cps[ci]) {
            ConvergencePoint pt;
            pt.N = N;
            try {
                pt.error = (fit_from_moments(G, Qm, d, ridge).K - Kstar).norm();
            } catch (const NumericalError&) {
                pt.rank_deficient = true;
                const double fallback = 1e-8 * G.trace() / d + 1e-300;
                pt.error = (fit_from_moments(G, Qm, d, fallback).K - Kstar).norm();
            }
            out.push_back(pt);
            ++ci;
        }
    }
    return out;
}

// --- Timing experiment ---

std::vector<TimingRow> timing_experiment(const std::vector<int>& dims,
                                         const std::vector<std::uint64_t>& sizes, int rls_reps) {
    if (dims.empty() || sizes.empty()) throw ConfigError("timing_experiment: empty axes");
    if (rls_reps < 1) throw ConfigError("timing_experiment: rls_reps must be positive");

    std::vector<TimingRow> rows;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int n : dims) {
        if (n < 1) throw ConfigError("timing_experiment: dims must be positive");
        // A pool of distinct snapshot vectors so the timed loop is not a
        // single cached pattern.
        constexpr int kPool = 64;
        Eigen::MatrixXd pool_a(n, kPool), pool_b(n, kPool);
        for (int c = 0; c < kPool; ++c)
            for (int r = 0; r < n; ++r) {
                pool_a(r, c) = gauss(rng);
                pool_b(r, c) = gauss(rng);
            }
        Eigen::MatrixXd K0(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) K0(r, c) = 0.1 * gauss(rng);

        for (std::uint64_t N : sizes) {
            if (N < 1) throw ConfigError("timing_experiment: sizes must be positive");
            TimingRow row;
            row.dim = n;
            row.dataset_size = N;

            // RLS: P at the scale it would have after N samples.
            RlsState rls(K0, Eigen::MatrixXd::Identity(n, n) / static_cast<double>(N));
            for (int w = 0; w < 16; ++w) rls.update(pool_a.col(w % kPool), pool_b.col(w % kPool));
            const auto t0 = clock_type::now();
            for (int r = 0; r < rls_reps; ++r)
                rls.update(pool_a.col(r % kPool), pool_b.col(r % kPool));
            row.rls_update_us = seconds_since(t0) * 1e6 / rls_reps;

            // EDMD retrain on a dataset of N columns; repeat small problems so
            // the measurement is not pure clock noise.
            const Eigen::Index cols = static_cast<Eigen::Index>(N);
            Eigen::MatrixXd Y(n, cols), Ybar(n, cols);
            for (Eigen::Index c = 0; c < cols; ++c)
                for (int r = 0; r < n; ++r) {
                    Y(r, c) = gauss(rng);
                    Ybar(r, c) = gauss(rng);
                }
            const int fit_reps = std::max(
                1, static_cast<int>(50'000'000 / (static_cast<std::uint64_t>(n) * n * N + 1)));
            const auto t1 = clock_type::now();
            for (int r = 0; r < fit_reps; ++r) fit_edmd(Y, Ybar, n, 1e-9);
            row.edmd_retrain_s = seconds_since(t1) / fit_reps;

            rows.push_back(row);
        }
    }
    return rows;
}

} // namespace rkl
