#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "rkl/basis.hpp"
#include "rkl/dataset.hpp"

namespace rkl {

// Lifted-space linear model beta = K alpha with alpha = [phi(x); psi(u)],
// beta = [phi(x'); psi(u)]. K is square over the full lifted pair; the state
// update z' = K_z z + K_g g reads off the top blocks. P is the inverse data
// Gramian (sum alpha alpha^T, plus ridge) needed to continue training
// recursively.
struct KoopmanModel {
    Eigen::MatrixXd K; // (n_z + n_g) x (n_z + n_g)
    Eigen::MatrixXd P; // (n_z + n_g) x (n_z + n_g)
    int n_z = 0;
    int n_g = 0;
    BasisSpec state_basis;
    BasisSpec control_basis; // ignored when n_g == 0
    bool has_control = false;
    double dt = 0.0;
    std::uint64_t sample_count = 0;

    Eigen::Ref<const Eigen::MatrixXd> K_z() const { return K.topLeftCorner(n_z, n_z); }
    Eigen::Ref<const Eigen::MatrixXd> K_g() const { return K.topRightCorner(n_z, n_g); }
};

// Diagnostics for the data Gramian Y Y^T used by the EDMD solve.
struct WellposednessReport {
    int rank = 0;
    int dim = 0;
    double cond = 0.0; // sigma_max / sigma_min, inf when singular
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    bool full_rank = false;
};

// Builds the stacked snapshot matrices: column k of Y is [phi(x_k); psi(u_k)],
// column k of Ybar is [phi(x_{k+1}); psi(u_k)]. control may be empty
// (autonomous data, n_u == 0), in which case psi contributes nothing.
void assemble_snapshots(const SnapshotDataset& data, const Basis& state_basis,
                        const Basis* control_basis, Eigen::MatrixXd& Y, Eigen::MatrixXd& Ybar);

// Least squares K = (Ybar Y^T)(Y Y^T + ridge I)^{-1}. Stores P = (Y Y^T + ridge I)^{-1}.
// With ridge == 0 a rank-deficient Gramian throws NumericalError naming the
// rank and condition number.
KoopmanModel fit_edmd(const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Ybar, int n_z,
                      double ridge = 0.0);

// Same solve from accumulated moments G = Y Y^T and Q = Ybar Y^T, for callers
// that stream snapshots instead of materializing Y.
KoopmanModel fit_from_moments(const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q, int n_z,
                              double ridge = 0.0);

// Convenience overload: lifts the dataset and fills in basis metadata, dt and
// sample_count on the returned model.
KoopmanModel fit_edmd(const SnapshotDataset& data, const BasisSpec& state_basis,
                      const BasisSpec& control_basis, double ridge = 0.0);

// Autonomous variant (no control lift, n_g == 0).
KoopmanModel fit_edmd(const SnapshotDataset& data, const BasisSpec& state_basis,
                      double ridge = 0.0);

WellposednessReport wellposedness_report(const Eigen::MatrixXd& Y);

std::string describe(const WellposednessReport& rep);

} // namespace rkl
