#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "rkl/dataset.hpp"

namespace rkl {

// --- Planar two-link arm (horizontal plane, no gravity) ---

struct ArmState {
    Eigen::Vector2d q;    // joint angles, rad
    Eigen::Vector2d qdot; // joint velocities, rad/s

    Eigen::Vector4d as_vector() const {
        return Eigen::Vector4d(q[0], q[1], qdot[0], qdot[1]);
    }
    static ArmState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
        return {{x[0], x[1]}, {x[2], x[3]}};
    }
};

struct ArmParams {
    double l1 = 0.1;      // link lengths, m
    double l2 = 0.1;
    double m1 = 0.05;     // link masses, kg (uniform rods)
    double m2 = 0.05;
    double damping = 0.01; // joint viscous damping, N·m·s/rad
    double u_max = 0.5;   // torque bound, N·m
    double dt = 0.01;     // integrator step, s

    void validate() const;
};

// One RK4 step of M(q)q̈ + C(q,q̇)q̇ + D q̇ = u with u held constant over dt.
ArmState arm_step(const ArmState& s, const Eigen::Vector2d& u, const ArmParams& p);

// Joint accelerations at the given state. Exposed for oracle checks.
Eigen::Vector2d arm_accel(const ArmState& s, const Eigen::Vector2d& u, const ArmParams& p);

// Kinetic energy T = 1/2 q̇ᵀ M(q) q̇. Conserved when u = 0 and damping = 0.
double arm_kinetic_energy(const ArmState& s, const ArmParams& p);

// r = −100‖q_d−q‖ − 10‖q̇_d−q̇‖ − u₁² − u₂²  (norms, not squared norms)
double arm_reward(const ArmState& s, const Eigen::Vector2d& u, const Eigen::Vector2d& q_d,
                  const Eigen::Vector2d& qdot_d);

// Tip position of the figure-eight reference at time t of a period T:
// p_x = 0.05 sin(4πt/T) + 0.1, p_y = 0.1 cos(2πt/T).
Eigen::Vector2d figure8_reference(double t, double T);

enum class Elbow { up, down };

// Tip position from joint angles.
Eigen::Vector2d arm_fk(const Eigen::Vector2d& q, const ArmParams& p);

// Closed-form two-link inverse kinematics. elbow=down takes q2 in [0, π],
// elbow=up the mirror solution. Throws on unreachable targets.
Eigen::Vector2d arm_ik(const Eigen::Vector2d& tip, const ArmParams& p,
                       Elbow elbow = Elbow::down);

struct JointReference {
    Eigen::Vector2d q_d;
    Eigen::Vector2d qdot_d;
};

// Joint-space reference for one figure-eight period: IK of figure8_reference
// at steps 0..N-1 (N = round(T/dt)), velocities by central differences with
// one-sided differences at both ends.
std::vector<JointReference> reference_joint_traj(double T, double dt, const ArmParams& p,
                                                 Elbow elbow = Elbow::down);

// Uniform initial-condition sampling: q ∈ [−0.1, 0.1], q̇ ∈ [−0.005, 0.005].
ArmState sample_arm_init(std::mt19937_64& rng);

// --- Synthetic ergodic Markov chain x_{k+1} = A x_k + w, w ~ N(0, noise_cov) ---

struct ChainSpec {
    Eigen::MatrixXd A;
    Eigen::MatrixXd noise_cov;
    int n = 0;
    std::uint64_t seed = 0;

    void validate() const; // spectral radius < 1 − 1e-6, noise_cov SPD
};

// N snapshot pairs from the chain started at x_0 = 0. Autonomous: the
// dataset's control channel is empty (n_u = 0). Deterministic per seed.
SnapshotDataset chain_sample(const ChainSpec& spec, int N);

double spectral_radius(const Eigen::MatrixXd& A);

// Seeded Gaussian matrix rescaled to the requested spectral radius; used to
// generate chain dynamics from config scalars.
Eigen::MatrixXd random_stable_matrix(int n, double rho, std::uint64_t seed);

// Stationary covariance: fixed point of Σ = AΣAᵀ + W.
Eigen::MatrixXd lyapunov_stationary_cov(const Eigen::MatrixXd& A, const Eigen::MatrixXd& W);

} // namespace rkl
