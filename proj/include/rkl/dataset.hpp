#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace rkl {

// One snapshot pair: state, the control applied there, and the state one
// step later.
struct SnapshotRecord {
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    Eigen::VectorXd x_next;
    int traj = 0;
};

// Ordered (x_k, u_k, x_{k+1}) triples at a uniform time step.
struct SnapshotDataset {
    double dt = 0.0;
    int n_x = 0;
    int n_u = 0;
    std::vector<SnapshotRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    void append(SnapshotRecord rec);

    // Consecutive records of the same trajectory must chain:
    // rec[k].x_next == rec[k+1].x. Throws ConfigError on violation.
    void validate_chaining() const;
};

// Builds snapshot pairs from consecutive rows of a raw trajectory
// (times t_k, states x_k, controls u_k; the control of the final row is
// ignored). Non-uniform timestamps are first resampled onto a uniform grid
// by linear interpolation of both states and controls.
SnapshotDataset dataset_from_trajectory(const std::vector<double>& t,
                                        const std::vector<Eigen::VectorXd>& x,
                                        const std::vector<Eigen::VectorXd>& u,
                                        int traj = 0);

// Trajectory CSV format: '#'-prefixed metadata lines (format version and the
// resolved config echo), then a header row `t,x0..x{n_x-1},u0..u{n_u-1}`,
// then one row per sample.
void save_trajectory_csv(const std::string& path, const std::vector<double>& t,
                         const std::vector<Eigen::VectorXd>& x,
                         const std::vector<Eigen::VectorXd>& u,
                         const std::string& config_echo);

struct TrajectoryFile {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
    std::vector<Eigen::VectorXd> u;
    std::string config_echo;
};

TrajectoryFile load_trajectory_csv(const std::string& path);

SnapshotDataset load_dataset_csv(const std::string& path);

// Linear interpolation of a sampled signal onto a uniform grid with step dt
// over the original time span.
void resample_uniform(std::vector<double>& t, std::vector<Eigen::VectorXd>& x,
                      std::vector<Eigen::VectorXd>& u, double dt);

} // namespace rkl
