#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>

#include "rkl/edmd.hpp"

namespace rkl {

// Recursive least squares over the lifted snapshots. Seeded from a batch fit
// (K and P of a KoopmanModel); each update folds in one snapshot pair in
// O((n_z+n_g)^2) regardless of how many samples came before. The hot path
// performs no allocation: all scratch lives in the state object.
class RlsState {
  public:
    RlsState() = default;
    RlsState(Eigen::MatrixXd K, Eigen::MatrixXd P, std::uint64_t base_count = 0);
    explicit RlsState(const KoopmanModel& model)
        : RlsState(model.K, model.P, model.sample_count) {}

    // Rank-one update with alpha = [phi(x_k); psi(u_k)], beta = [phi(x_{k+1}); psi(u_k)].
    // alpha == 0 leaves the state untouched.
    void update(const Eigen::Ref<const Eigen::VectorXd>& alpha,
                const Eigen::Ref<const Eigen::VectorXd>& beta);

    const Eigen::MatrixXd& K() const { return K_; }
    const Eigen::MatrixXd& P() const { return P_; }
    std::uint64_t update_count() const { return update_count_; }
    std::uint64_t sample_count() const { return base_count_ + update_count_; }
    Eigen::Index dim() const { return P_.rows(); }

    // Writes K, P and the total sample count back into a model.
    void store(KoopmanModel& model) const;

  private:
    Eigen::MatrixXd K_;
    Eigen::MatrixXd P_;
    std::uint64_t base_count_ = 0;
    std::uint64_t update_count_ = 0;

    // Preallocated scratch for update().
    Eigen::VectorXd Pa_;
    Eigen::VectorXd resid_;
};

// Gain of a single RLS step: 1 / (1 + alpha^T P alpha).
double gain_gamma(const Eigen::MatrixXd& P, const Eigen::Ref<const Eigen::VectorXd>& alpha);

// Snapshot-consistent exchange of a model between a learner thread and a
// consumer (controller) thread. publish() replaces the stored model; take()
// returns the latest published model, or nullptr when nothing new arrived
// since the last take().
class ModelHandoff {
  public:
    void publish(const KoopmanModel& model);
    std::shared_ptr<const KoopmanModel> take();
    std::shared_ptr<const KoopmanModel> peek() const;

  private:
    mutable std::mutex mu_;
    std::shared_ptr<const KoopmanModel> slot_;
    bool fresh_ = false;
};

} // namespace rkl
