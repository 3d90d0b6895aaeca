#include "rkl/env.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {

void ArmParams::validate() const {
    if (!(l1 > 0 && l2 > 0 && m1 > 0 && m2 > 0))
        throw ConfigError("arm: link lengths and masses must be positive");
    if (damping < 0) throw ConfigError("arm: damping must be non-negative");
    if (!(u_max > 0)) throw ConfigError("arm: u_max must be positive");
    if (!(dt > 0)) throw ConfigError("arm: dt must be positive");
}

namespace {

// Links are uniform rods: center of mass at l/2, inertia m l^2 / 12 about it.
struct ArmCoef {
    double a1, a2, a3;
};

ArmCoef arm_coef(const ArmParams& p) {
    const double lc1 = 0.5 * p.l1, lc2 = 0.5 * p.l2;
    const double I1 = p.m1 * p.l1 * p.l1 / 12.0;
    const double I2 = p.m2 * p.l2 * p.l2 / 12.0;
    return {I1 + p.m1 * lc1 * lc1 + p.m2 * p.l1 * p.l1, I2 + p.m2 * lc2 * lc2,
            p.m2 * p.l1 * lc2};
}

Eigen::Matrix2d mass_matrix(const ArmCoef& c, double cos_q2) {
    Eigen::Matrix2d M;
    M(0, 0) = c.a1 + c.a2 + 2.0 * c.a3 * cos_q2;
    M(0, 1) = M(1, 0) = c.a2 + c.a3 * cos_q2;
    M(1, 1) = c.a2;
    return M;
}

} // namespace

Eigen::Vector2d arm_accel(const ArmState& s, const Eigen::Vector2d& u, const ArmParams& p) {
    const ArmCoef c = arm_coef(p);
    const double s2 = std::sin(s.q[1]);
    const Eigen::Matrix2d M = mass_matrix(c, std::cos(s.q[1]));
    const Eigen::Vector2d coriolis(
        -c.a3 * s2 * (2.0 * s.qdot[0] * s.qdot[1] + s.qdot[1] * s.qdot[1]),
        c.a3 * s2 * s.qdot[0] * s.qdot[0]);
    return M.ldlt().solve(u - coriolis - p.damping * s.qdot);
}

ArmState arm_step(const ArmState& s, const Eigen::Vector2d& u, const ArmParams& p) {
    const auto deriv = [&](const Eigen::Vector4d& x) {
        const ArmState st{{x[0], x[1]}, {x[2], x[3]}};
        const Eigen::Vector2d qdd = arm_accel(st, u, p);
        return Eigen::Vector4d(x[2], x[3], qdd[0], qdd[1]);
    };
    const Eigen::Vector4d x0 = s.as_vector();
    const double h = p.dt;
    const Eigen::Vector4d k1 = deriv(x0);
    const Eigen::Vector4d k2 = deriv(x0 + 0.5 * h * k1);
    const Eigen::Vector4d k3 = deriv(x0 + 0.5 * h * k2);
    const Eigen::Vector4d k4 = deriv(x0 + h * k3);
    const Eigen::Vector4d x1 = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x1.allFinite()) {
        std::ostringstream msg;
        msg << "arm_step: non-finite state from q=[" << s.q.transpose() << "], qdot=["
            << s.qdot.transpose() << "], u=[" << u.transpose() << "]";
        throw NumericalError(msg.str());
    }
    return ArmState::from_vector(x1);
}

double arm_kinetic_energy(const ArmState& s, const ArmParams& p) {
    const Eigen::Matrix2d M = mass_matrix(arm_coef(p), std::cos(s.q[1]));
    return 0.5 * s.qdot.dot(M * s.qdot);
}

double arm_reward(const ArmState& s, const Eigen::Vector2d& u, const Eigen::Vector2d& q_d,
                  const Eigen::Vector2d& qdot_d) {
    return -100.0 * (q_d - s.q).norm() - 10.0 * (qdot_d - s.qdot).norm() - u[0] * u[0] -
           u[1] * u[1];
}

Eigen::Vector2d figure8_reference(double t, double T) {
    const double w = 2.0 * std::numbers::pi * t / T;
    return {0.05 * std::sin(2.0 * w) + 0.1, 0.1 * std::cos(w)};
}

Eigen::Vector2d arm_fk(const Eigen::Vector2d& q, const ArmParams& p) {
    return {p.l1 * std::cos(q[0]) + p.l2 * std::cos(q[0] + q[1]),
            p.l1 * std::sin(q[0]) + p.l2 * std::sin(q[0] + q[1])};
}

Eigen::Vector2d arm_ik(const Eigen::Vector2d& tip, const ArmParams& p, Elbow elbow) {
    const double r2 = tip.squaredNorm();
    const double c2 = (r2 - p.l1 * p.l1 - p.l2 * p.l2) / (2.0 * p.l1 * p.l2);
    if (c2 > 1.0 + 1e-12 || c2 < -1.0 - 1e-12) {
        std::ostringstream msg;
        msg << "arm_ik: target (" << tip[0] << ", " << tip[1] << ") unreachable for l1=" << p.l1
            << ", l2=" << p.l2;
        throw ConfigError(msg.str());
    }
    const double q2_mag = std::acos(std::clamp(c2, -1.0, 1.0));
    const double q2 = (elbow == Elbow::down) ? q2_mag : -q2_mag;
    const double q1 = std::atan2(tip[1], tip[0]) -
                      std::atan2(p.l2 * std::sin(q2), p.l1 + p.l2 * std::cos(q2));
    return {q1, q2};
}

std::vector<JointReference> reference_joint_traj(double T, double dt, const ArmParams& p,
                                                 Elbow elbow) {
    if (!(T > 0) || !(dt > 0)) throw ConfigError("reference_joint_traj: T and dt must be positive");
    const int N = static_cast<int>(std::lround(T / dt));
    if (N < 2) throw ConfigError("reference_joint_traj: need at least two samples");

    std::vector<Eigen::Vector2d> q(N);
    for (int k = 0; k < N; ++k)
        q[k] = arm_ik(figure8_reference(k * dt, T), p, elbow);

    std::vector<JointReference> out(N);
    for (int k = 0; k < N; ++k) {
        out[k].q_d = q[k];
        if (k == 0) out[k].qdot_d = (q[1] - q[0]) / dt;
        else if (k == N - 1) out[k].qdot_d = (q[N - 1] - q[N - 2]) / dt;
        else out[k].qdot_d = (q[k + 1] - q[k - 1]) / (2.0 * dt);
    }
    return out;
}

ArmState sample_arm_init(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dq(-0.1, 0.1);
    std::uniform_real_distribution<double> dv(-0.005, 0.005);
    ArmState s;
    s.q = {dq(rng), dq(rng)};
    s.qdot = {dv(rng), dv(rng)};
    return s;
}

void ChainSpec::validate() const {
    if (n <= 0) throw ConfigError("chain: n must be positive");
    if (A.rows() != n || A.cols() != n || noise_cov.rows() != n || noise_cov.cols() != n)
        throw ConfigError("chain: A and noise_cov must be n x n");
    const double rho = spectral_radius(A);
    if (!(rho < 1.0 - 1e-6))
        throw ConfigError("chain: spectral radius " + std::to_string(rho) +
                          " too close to 1; the chain would not be ergodic");
    if (!noise_cov.isApprox(noise_cov.transpose(), 1e-12))
        throw ConfigError("chain: noise_cov must be symmetric");
    if (Eigen::LLT<Eigen::MatrixXd>(noise_cov).info() != Eigen::Success)
        throw ConfigError("chain: noise_cov must be positive definite");
}

SnapshotDataset chain_sample(const ChainSpec& spec, int N) {
    spec.validate();
    if (N < 1) throw ConfigError("chain_sample: N must be at least 1");

    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(spec.noise_cov).matrixL();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    SnapshotDataset ds;
    ds.dt = 1.0;
    ds.n_x = spec.n;
    ds.n_u = 0;
    ds.records.reserve(static_cast<std::size_t>(N));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.n);
    Eigen::VectorXd noise(spec.n);
    const Eigen::VectorXd u_empty(0);
    for (int k = 0; k < N; ++k) {
        for (int i = 0; i < spec.n; ++i) noise[i] = gauss(rng);
        Eigen::VectorXd x_next = spec.A * x + L * noise;
        ds.records.push_back({x, u_empty, x_next, 0});
        x = std::move(x_next);
    }
    return ds;
}

double spectral_radius(const Eigen::MatrixXd& A) {
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd random_stable_matrix(int n, double rho, std::uint64_t seed) {
    if (n < 1) throw ConfigError("random_stable_matrix: n must be positive");
    if (!(rho > 0) || !(rho < 1)) throw ConfigError("random_stable_matrix: need 0 < rho < 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd M(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) M(r, c) = gauss(rng);
    const double sr = spectral_radius(M);
    if (sr <= 0) return Eigen::MatrixXd::Identity(n, n) * rho; // degenerate draw
    return M * (rho / sr);
}

Eigen::MatrixXd lyapunov_stationary_cov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& W) {
    if (!(spectral_radius(A) < 1.0))
        throw NumericalError("lyapunov: A must be Schur stable");
    Eigen::MatrixXd S = W;
    for (int it = 0; it < 100000; ++it) {
        Eigen::MatrixXd next = A * S * A.transpose() + W;
        const double delta = (next - S).norm();
        S = std::move(next);
        if (delta <= 1e-14 * std::max(1.0, S.norm())) return S;
    }
    throw NumericalError("lyapunov: fixed-point iteration did not converge");
}

} // namespace rkl
