#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rkl/basis.hpp"
#include "rkl/config.hpp"
#include "rkl/control.hpp"
#include "rkl/dataset.hpp"
#include "rkl/env.hpp"
#include "rkl/metrics.hpp"

namespace rkl {

enum class Controller { sac, lqr };
enum class UpdateMode { rkl, kl };
enum class InitialData { random, demo, file };

std::string to_string(Controller c);
std::string to_string(UpdateMode m);
std::string to_string(InitialData d);

// Everything one closed-loop experiment needs, bound from a ConfigMap. Keys
// and defaults are documented in the README config schema.
struct RunConfig {
    ArmParams arm;
    BasisSpec state_basis = BasisSpec::arm17();
    BasisSpec control_basis = BasisSpec::identity(2);
    Controller controller = Controller::sac;
    UpdateMode update_mode = UpdateMode::rkl;
    InitialData initial_dataset = InitialData::random;
    int initial_steps = 500;
    std::string initial_path;
    int episode_length = 500;
    std::vector<std::uint64_t> seeds{1};
    double ridge = 0.0;
    double figure8_period = 5.0;
    Elbow elbow = Elbow::down;
    double demo_kp = 1.0;
    double demo_kd = 0.1;
    LqrConfig lqr;   // pure-LQR controller and the SAC nominal policy
    SacConfig sac;
    bool concurrent_updates = false; // snapshot-handoff thread instead of lockstep
    int diag_stride = 100;           // Gramian conditioning is sampled every this many steps
    std::string echo;                // resolved config, embedded in artifacts

    static RunConfig from_config(const ConfigMap& cfg);
    void validate() const;
};

// Raw collected trajectory plus its snapshot form.
struct CollectedData {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;
    SnapshotDataset dataset;
};

// random: uniform torques over the action box; demo: PD tracking of the
// figure-eight joint reference; file: loads cfg.initial_path.
CollectedData collect_initial(const RunConfig& cfg, std::uint64_t seed);
CollectedData collect_random(const ArmParams& p, int steps, std::uint64_t seed);
CollectedData collect_demo(const ArmParams& p, int steps, double figure8_period, double kp,
                           double kd, std::uint64_t seed, Elbow elbow = Elbow::down);

struct GramianSample {
    int step = 0; // 0 is the initial fit
    double cond = 0.0;
    int rank = 0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    TipTrajectory tip;
    TipTrajectory tip_ref;
    double rmse = 0.0;
    double time_lag = 0.0;
    double frechet = 0.0;
    double saturation_rate = 0.0;
    double mean_reward = 0.0;
    std::uint64_t updates_applied = 0;
    std::uint64_t gain_holds = 0; // steps served by the previous gain after a Riccati stall
    std::vector<GramianSample> gramian; // well-posedness over time
};

struct EvalReport {
    std::string config_echo;
    std::string controller;
    std::string update_mode;
    std::vector<SeedResult> per_seed;
    double rmse_mean = 0.0, rmse_std = 0.0;
    double time_lag_mean = 0.0, time_lag_std = 0.0;
    double frechet_mean = 0.0, frechet_std = 0.0;
    double saturation_rate_mean = 0.0;
    double mean_reward_mean = 0.0;
    std::map<std::string, double> timing; // wallclock per stage, seconds

    // JSON rendering. Wallclock lives only under the top-level "timing" key
    // so determinism checks can strip it.
    std::string to_json(int indent = 2) const;
};

// One closed-loop episode: EDMD on the initial data, then per step
// {lift, MPC action, env step, RLS update unless KL}. The model used for the
// action at step k+1 has absorbed exactly snapshots 0..k. The arm starts at
// the first reference state; the seed only shapes the initial dataset.
SeedResult run_episode(const RunConfig& cfg, std::uint64_t seed);

// Runs all configured seeds (parallel up to RKL_THREADS), aggregates, fills
// timing.
EvalReport run_experiment(const RunConfig& cfg);

// Mean/stddev (sample, n-1) helpers shared by reports and tests.
double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);

// --- Convergence on synthetic chains ---

struct ConvergencePoint {
    std::uint64_t N = 0;
    double error = 0.0; // ||K_N - K*||_F
    bool rank_deficient = false;
};

// Streams one chain once to the largest checkpoint, solving at each
// checkpoint from accumulated moments. K* comes from the stationary moments
// of the linear-Gaussian chain for the identity basis, otherwise from a
// Monte Carlo oracle (mc_samples draws at an independent seed). Rank
// deficiency at a checkpoint is recorded and the solve retried with a ridge.
std::vector<ConvergencePoint> convergence_experiment(const ChainSpec& spec,
                                                     const BasisSpec& basis,
                                                     const std::vector<std::uint64_t>& checkpoints,
                                                     double ridge = 0.0,
                                                     std::uint64_t mc_samples = 10'000'000);

// The limiting operator itself (exposed for oracles and the CLI).
Eigen::MatrixXd chain_koopman_limit(const ChainSpec& spec, const BasisSpec& basis,
                                    std::uint64_t mc_samples = 10'000'000);

// --- Timing: RLS per-update cost vs. EDMD retrain cost ---

struct TimingRow {
    int dim = 0;                // lifted dimension n
    std::uint64_t dataset_size = 0;
    double rls_update_us = 0.0; // mean per rank-one update
    double edmd_retrain_s = 0.0;
};

std::vector<TimingRow> timing_experiment(const std::vector<int>& dims,
                                         const std::vector<std::uint64_t>& sizes,
                                         int rls_reps = 2000);

// Parallelism cap: RKL_THREADS when set and positive, else hardware threads.
int thread_cap();

} // namespace rkl
