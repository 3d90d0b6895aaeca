#include "rkl/rls.hpp"

#include "rkl/errors.hpp"

namespace rkl {

RlsState::RlsState(Eigen::MatrixXd K, Eigen::MatrixXd P, std::uint64_t base_count)
    : K_(std::move(K)), P_(std::move(P)), base_count_(base_count) {
    if (P_.rows() != P_.cols()) throw ConfigError("rls: P must be square");
    if (K_.cols() != P_.rows()) throw ConfigError("rls: K columns must match P dimension");
    Pa_.resize(P_.rows());
    resid_.resize(K_.rows());
}

double gain_gamma(const Eigen::MatrixXd& P, const Eigen::Ref<const Eigen::VectorXd>& alpha) {
    return 1.0 / (1.0 + alpha.dot(P * alpha));
}

void RlsState::update(const Eigen::Ref<const Eigen::VectorXd>& alpha,
                      const Eigen::Ref<const Eigen::VectorXd>& beta) {
    if (alpha.size() != P_.rows() || beta.size() != K_.rows())
        throw ConfigError("rls: snapshot dimensions do not match the state");

    Pa_.noalias() = P_ * alpha;
    const double denom = 1.0 + alpha.dot(Pa_);
    const double gamma = 1.0 / denom;
    if (Pa_.isZero(0.0)) return; // alpha in the null space contributes nothing

    // K += gamma (beta - K alpha) (P alpha)^T
    resid_.noalias() = beta - K_ * alpha;
    K_.noalias() += gamma * resid_ * Pa_.transpose();

    // P -= gamma (P alpha)(P alpha)^T, then resymmetrize to stop drift.
    P_.noalias() -= gamma * Pa_ * Pa_.transpose();
    P_ = 0.5 * (P_ + P_.transpose()).eval();

    ++update_count_;
}

void RlsState::store(KoopmanModel& model) const {
    model.K = K_;
    model.P = P_;
    model.sample_count = sample_count();
}

void ModelHandoff::publish(const KoopmanModel& model) {
    auto next = std::make_shared<const KoopmanModel>(model);
    std::lock_guard lock(mu_);
    slot_ = std::move(next);
    fresh_ = true;
}

std::shared_ptr<const KoopmanModel> ModelHandoff::take() {
    std::lock_guard lock(mu_);
    if (!fresh_) return nullptr;
    fresh_ = false;
    return slot_;
}

std::shared_ptr<const KoopmanModel> ModelHandoff::peek() const {
    std::lock_guard lock(mu_);
    return slot_;
}

} // namespace rkl
