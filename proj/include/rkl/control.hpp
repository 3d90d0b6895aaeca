#pragma once

#include <Eigen/Dense>

#include "rkl/edmd.hpp"

namespace rkl {

// Continuous-time view of a discrete lifted model: ż = A z + B u with
// A = (K_z − I)/dt, B = K_g/dt. First-order approximation; exact only when
// the discrete model was itself a forward-Euler discretization.
struct ContinuousKoopman {
    Eigen::MatrixXd A; // n_z x n_z
    Eigen::MatrixXd B; // n_z x n_u
};

ContinuousKoopman to_continuous(const KoopmanModel& m);

// Per-block diagonal weights for the quadratic tracking cost on the lifted
// state. The first n_x entries of the lift are the raw state; the leading
// n_x/2 of those get weight_pos, the rest of the raw block weight_vel, and
// every remaining lifted entry weight_obs. R = weight_u * I. A constant
// observable (present in the arm17 lift) gets weight 0 and is excluded from
// the Riccati solve: its tracking error vanishes identically, while its exact
// unit eigenvalue is uncontrollable and would stall the recursion. The gain
// column for that coordinate is zero.
struct LqrConfig {
    double weight_pos = 200.0;
    double weight_vel = 30.0;
    double weight_obs = 1.0;
    double weight_u = 0.001;
    double weight_terminal = 0.0;
    double horizon = 0.16; // seconds
    double dt = 0.01;      // seconds

    void validate() const;
};

struct SacConfig {
    double horizon = 0.16;   // T, seconds
    double dt = 0.01;        // integration step, seconds
    Eigen::VectorXd rbar;    // diagonal of R̄, one entry per control channel
    LqrConfig nominal;
    double u_max = 0.5;      // actuator bound used to clamp u*

    void validate() const;
    int steps() const; // H = horizon/dt, validated to be a whole number >= 1
};

// Affine policy μ_k(z) = u_ref − G (z − z_ref_k). The reference may vary per
// rollout step: column min(k, cols−1) of z_refs is the target over step k.
// ∂μ/∂z = −G regardless of step.
class LqrPolicy {
  public:
    LqrPolicy() = default;
    LqrPolicy(Eigen::MatrixXd G, Eigen::MatrixXd z_refs, Eigen::VectorXd u_ref);

    Eigen::VectorXd mu(const Eigen::Ref<const Eigen::VectorXd>& z, int k = 0) const;
    const Eigen::MatrixXd& gain() const { return G_; }
    Eigen::MatrixXd dmu_dz() const { return -G_; }
    Eigen::Ref<const Eigen::VectorXd> z_ref(int k) const {
        return z_refs_.col(std::min<Eigen::Index>(k, z_refs_.cols() - 1));
    }
    const Eigen::VectorXd& u_ref() const { return u_ref_; }

  private:
    Eigen::MatrixXd G_;
    Eigen::MatrixXd z_refs_;
    Eigen::VectorXd u_ref_;
};

// Fixed-point (value-iteration) solve of the discrete algebraic Riccati
// equation for (Ad, Bd) with diagonal Q, R. warm, when non-null and of
// matching size, seeds the iteration and receives the converged P.
struct DareResult {
    Eigen::MatrixXd P;
    Eigen::MatrixXd G; // (R + Bd'P Bd)^{-1} Bd'P Ad
    double residual = 0.0;
    int iters = 0;
};

DareResult solve_dare(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                      const Eigen::VectorXd& q_diag, const Eigen::VectorXd& r_diag,
                      double tol = 1e-10, int max_iters = 10000,
                      Eigen::MatrixXd* warm = nullptr);

// Infinite-horizon LQR gain on the model discretized as Ad = I + dt A,
// Bd = dt B (recovers the original K_z, K_g for converted models). The basis
// spec fixes the weight layout and identifies a constant feature to deflate.
// The z_refs overload installs a per-step reference schedule.
LqrPolicy lqr_nominal(const ContinuousKoopman& cont, const LqrConfig& cfg,
                      const BasisSpec& state_basis, const Eigen::VectorXd& z_ref,
                      const Eigen::VectorXd& u_ref, Eigen::MatrixXd* warm_P = nullptr);
LqrPolicy lqr_nominal(const ContinuousKoopman& cont, const LqrConfig& cfg,
                      const BasisSpec& state_basis, const Eigen::MatrixXd& z_refs,
                      const Eigen::VectorXd& u_ref, Eigen::MatrixXd* warm_P = nullptr);

// Quadratic tracking objective over a rollout of H steps:
//   J1 = ∫ (z−z_ref_k)'Q(z−z_ref_k) + (u−u_ref)'R(u−u_ref) dt  +  m(z(T))
//   m(z) = (z − z_ref_end)' Q_T (z − z_ref_end)
// with z_ref_k piecewise constant per step as in LqrPolicy.
class QuadraticObjective {
  public:
    QuadraticObjective(Eigen::VectorXd q_diag, Eigen::VectorXd r_diag, Eigen::VectorXd qT_diag,
                       Eigen::MatrixXd z_refs, Eigen::VectorXd u_ref);

    static QuadraticObjective from_config(const LqrConfig& cfg, const BasisSpec& state_basis,
                                          int n_u, Eigen::MatrixXd z_refs,
                                          Eigen::VectorXd u_ref);

    double l(const Eigen::Ref<const Eigen::VectorXd>& z,
             const Eigen::Ref<const Eigen::VectorXd>& u, int k) const;
    Eigen::VectorXd dl_dz(const Eigen::Ref<const Eigen::VectorXd>& z, int k) const;
    Eigen::VectorXd dl_du(const Eigen::Ref<const Eigen::VectorXd>& u) const;
    double m(const Eigen::Ref<const Eigen::VectorXd>& zT) const;
    Eigen::VectorXd dm_dz(const Eigen::Ref<const Eigen::VectorXd>& zT) const;

    Eigen::Ref<const Eigen::VectorXd> z_ref(int k) const {
        return z_refs_.col(std::min<Eigen::Index>(k, z_refs_.cols() - 1));
    }

  private:
    Eigen::VectorXd q_, r_, qT_;
    Eigen::MatrixXd z_refs_;
    Eigen::VectorXd u_ref_;
};

// Closed-loop rollout ż = A z + B μ_k(z), RK4 at step dt. u column k records
// μ_k(z_k) at the step start.
struct Rollout {
    Eigen::MatrixXd z; // n_z x (H+1)
    Eigen::MatrixXd u; // n_u x H
    double dt = 0.0;
};

Rollout simulate_nominal(const ContinuousKoopman& cont, const LqrPolicy& policy,
                         const Eigen::VectorXd& z0, int H, double dt);

// J1 of the closed-loop rollout, integrated with the same RK4 scheme via a
// quadrature state. When insert_steps > 0 the control on rollout steps
// 0..insert_steps-1 is the fixed vector *u_insert instead of the policy.
struct CostRollout {
    Rollout traj;
    double J1 = 0.0;
};

CostRollout rollout_cost(const ContinuousKoopman& cont, const LqrPolicy& policy,
                         const QuadraticObjective& obj, const Eigen::VectorXd& z0, int H,
                         double dt, const Eigen::VectorXd* u_insert = nullptr,
                         int insert_steps = 0);

// Costate sweep: ρ(H) = ∂m/∂z, then backward RK4 of
//   ρ̇ = −(∂l/∂z + (∂μ/∂z)' ∂l/∂u) − (A + B ∂μ/∂z)' ρ.
// Stage states are taken from the stored forward rollout (midpoints from a
// forward half-step), never by integrating z backward: reverse-time state
// integration turns the model's fast stable modes into growing ones and can
// overflow the costate. Returns n_z x (H+1); column 0 is ρ(0) = ∇_{z0} J1.
Eigen::MatrixXd sac_adjoint(const Rollout& traj, const ContinuousKoopman& cont,
                            const LqrPolicy& policy, const QuadraticObjective& obj);

inline double mode_insertion_gradient(const Eigen::VectorXd& rho, const Eigen::VectorXd& f1,
                                      const Eigen::VectorXd& f2) {
    return rho.dot(f2 - f1);
}

struct SacResult {
    Eigen::VectorXd u;         // action after clamping to ±u_max
    Eigen::VectorXd u_raw;     // closed-form action before clamping
    Eigen::VectorXd u_nominal; // μ(z) at the query state
    Eigen::VectorXd rho0;      // costate at t0
    double mode_insertion = 0.0; // ρ(0)'(f(z,u) − f(z,μ(z))) for the clamped u
    bool saturated = false;
};

// One action of sequential action control: build the nominal LQR policy,
// simulate it over the horizon, sweep the adjoint backward, then
// u* = −R̄^{-1} B' ρ(0) + μ(z), clamped to ±u_max. Requires an identity
// control lift so B acts on u directly. When `nominal` is given it is used
// as the nominal policy and the internal Riccati solve is skipped; callers
// that synthesize gains per step use this to keep the last good policy
// alive across transient solver failures.
SacResult sac_action(const KoopmanModel& m, const Eigen::VectorXd& z,
                     const Eigen::MatrixXd& z_refs, const Eigen::VectorXd& u_ref,
                     const SacConfig& cfg, Eigen::MatrixXd* warm_P = nullptr,
                     const LqrPolicy* nominal = nullptr);
SacResult sac_action(const KoopmanModel& m, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& z_ref, const Eigen::VectorXd& u_ref,
                     const SacConfig& cfg, Eigen::MatrixXd* warm_P = nullptr,
                     const LqrPolicy* nominal = nullptr);

} // namespace rkl
