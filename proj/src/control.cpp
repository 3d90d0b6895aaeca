#include "rkl/control.hpp"

#include <cmath>
#include <sstream>

#include "rkl/errors.hpp"

namespace rkl {

ContinuousKoopman to_continuous(const KoopmanModel& m) {
    if (!(m.dt > 0)) throw ConfigError("to_continuous: model dt must be positive");
    ContinuousKoopman cont;
    cont.A = (m.K_z() - Eigen::MatrixXd::Identity(m.n_z, m.n_z)) / m.dt;
    cont.B = m.K_g() / m.dt;
    return cont;
}

void LqrConfig::validate() const {
    if (!(dt > 0) || horizon < dt) throw ConfigError("lqr: need horizon >= dt > 0");
    if (!(weight_u > 0)) throw ConfigError("lqr: weight_u must be positive (R must be PD)");
    if (weight_pos < 0 || weight_vel < 0 || weight_obs < 0 || weight_terminal < 0)
        throw ConfigError("lqr: state weights must be non-negative");
}

void SacConfig::validate() const {
    nominal.validate();
    if (!(dt > 0)) throw ConfigError("sac: dt must be positive");
    if ((rbar.array() <= 0).any() || rbar.size() == 0)
        throw ConfigError("sac: all rbar entries must be positive");
    steps();
}

int SacConfig::steps() const {
    const double h = horizon / dt;
    const int H = static_cast<int>(std::lround(h));
    if (H < 1 || std::abs(h - H) > 1e-9)
        throw ConfigError("sac: horizon must be a whole positive number of dt steps");
    return H;
}

LqrPolicy::LqrPolicy(Eigen::MatrixXd G, Eigen::MatrixXd z_refs, Eigen::VectorXd u_ref)
    : G_(std::move(G)), z_refs_(std::move(z_refs)), u_ref_(std::move(u_ref)) {
    if (z_refs_.cols() < 1) throw ConfigError("policy: need at least one reference column");
    if (G_.rows() != u_ref_.size() || G_.cols() != z_refs_.rows())
        throw ConfigError("policy: gain dimensions do not match references");
}

Eigen::VectorXd LqrPolicy::mu(const Eigen::Ref<const Eigen::VectorXd>& z, int k) const {
    return u_ref_ - G_ * (z - z_ref(k));
}

DareResult solve_dare(const Eigen::MatrixXd& Ad, const Eigen::MatrixXd& Bd,
                      const Eigen::VectorXd& q_diag, const Eigen::VectorXd& r_diag,
                      double tol, int max_iters, Eigen::MatrixXd* warm) {
    const Eigen::Index n = Ad.rows(), nu = Bd.cols();
    if (Ad.cols() != n || Bd.rows() != n || q_diag.size() != n || r_diag.size() != nu)
        throw ConfigError("solve_dare: inconsistent dimensions");
    if ((r_diag.array() <= 0).any()) throw ConfigError("solve_dare: R must be positive definite");

    const Eigen::MatrixXd Q = q_diag.asDiagonal();
    Eigen::MatrixXd P = (warm && warm->rows() == n && warm->cols() == n) ? *warm : Q;

    DareResult res;
    Eigen::MatrixXd S(nu, nu), BtP(nu, n), G(nu, n), next(n, n);
    for (res.iters = 1; res.iters <= max_iters; ++res.iters) {
        BtP.noalias() = Bd.transpose() * P;
        S.noalias() = BtP * Bd;
        S.diagonal() += r_diag;
        G = S.ldlt().solve(BtP * Ad);
        next.noalias() = Ad.transpose() * P * (Ad - Bd * G);
        next += Q;
        next = 0.5 * (next + next.transpose()).eval();
        res.residual = (next - P).cwiseAbs().maxCoeff() / std::max(1.0, next.cwiseAbs().maxCoeff());
        P = next;
        if (res.residual <= tol) {
            res.P = std::move(P);
            BtP.noalias() = Bd.transpose() * res.P;
            S.noalias() = BtP * Bd;
            S.diagonal() += r_diag;
            res.G = S.ldlt().solve(BtP * Ad);
            if (warm) *warm = res.P;
            return res;
        }
    }
    std::ostringstream msg;
    msg << "solve_dare: no fixed point after " << max_iters << " iterations (residual "
        << res.residual << ")";
    throw NumericalError(msg.str());
}

namespace {

Eigen::VectorXd state_weight_diag(const LqrConfig& cfg, const BasisSpec& basis, int n_z) {
    const int n_x = basis.n_x;
    if (n_x <= 0 || n_z < n_x) throw ConfigError("lqr weights: need n_z >= n_x > 0");
    Eigen::VectorXd q(n_z);
    const int n_pos = n_x / 2;
    q.head(n_pos).setConstant(cfg.weight_pos);
    q.segment(n_pos, n_x - n_pos).setConstant(cfg.weight_vel);
    q.tail(n_z - n_x).setConstant(cfg.weight_obs);
    if (basis.kind == BasisKind::arm17 && n_z > n_x) q[n_x] = 0.0;
    return q;
}

// Index of a constant-one feature in the lift, or -1 when none exists. A
// constant feature carries an exact unit eigenvalue that no input can move,
// so the tracking Riccati recursion only converges once that row and column
// are removed. The tracking error on that coordinate is identically zero, so
// the removed gain column is zero as well.
int constant_feature_index(const BasisSpec& basis) {
    return basis.kind == BasisKind::arm17 ? basis.n_x : -1;
}

Eigen::MatrixXd drop_index(const Eigen::MatrixXd& M, int row, int col) {
    Eigen::MatrixXd out(M.rows() - (row >= 0 ? 1 : 0), M.cols() - (col >= 0 ? 1 : 0));
    for (Eigen::Index i = 0, io = 0; i < M.rows(); ++i) {
        if (i == row) continue;
        for (Eigen::Index j = 0, jo = 0; j < M.cols(); ++j) {
            if (j == col) continue;
            out(io, jo++) = M(i, j);
        }
        ++io;
    }
    return out;
}

} // namespace

LqrPolicy lqr_nominal(const ContinuousKoopman& cont, const LqrConfig& cfg,
                      const BasisSpec& state_basis, const Eigen::MatrixXd& z_refs,
                      const Eigen::VectorXd& u_ref, Eigen::MatrixXd* warm_P) {
    cfg.validate();
    const Eigen::Index n_z = cont.A.rows(), n_u = cont.B.cols();
    if (z_refs.rows() != n_z || u_ref.size() != n_u)
        throw ConfigError("lqr_nominal: reference dimensions do not match the model");

    Eigen::MatrixXd Ad = Eigen::MatrixXd::Identity(n_z, n_z) + cfg.dt * cont.A;
    Eigen::MatrixXd Bd = cfg.dt * cont.B;
    Eigen::VectorXd q = state_weight_diag(cfg, state_basis, static_cast<int>(n_z));
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(n_u, cfg.weight_u);

    const int cidx = constant_feature_index(state_basis);
    if (cidx >= 0 && cidx < n_z) {
        Ad = drop_index(Ad, cidx, cidx);
        Bd = drop_index(Bd, cidx, -1);
        Eigen::VectorXd qr(n_z - 1);
        qr << q.head(cidx), q.tail(n_z - 1 - cidx);
        q = std::move(qr);
    }

    const DareResult dare = solve_dare(Ad, Bd, q, r, 1e-10, 10000, warm_P);
    Eigen::MatrixXd G = dare.G;
    if (cidx >= 0 && cidx < n_z) {
        Eigen::MatrixXd full(n_u, n_z);
        full << G.leftCols(cidx), Eigen::VectorXd::Zero(n_u), G.rightCols(n_z - 1 - cidx);
        G = std::move(full);
    }
    return LqrPolicy(G, z_refs, u_ref);
}

LqrPolicy lqr_nominal(const ContinuousKoopman& cont, const LqrConfig& cfg,
                      const BasisSpec& state_basis, const Eigen::VectorXd& z_ref,
                      const Eigen::VectorXd& u_ref, Eigen::MatrixXd* warm_P) {
    return lqr_nominal(cont, cfg, state_basis, Eigen::MatrixXd(z_ref), u_ref, warm_P);
}

QuadraticObjective::QuadraticObjective(Eigen::VectorXd q_diag, Eigen::VectorXd r_diag,
                                       Eigen::VectorXd qT_diag, Eigen::MatrixXd z_refs,
                                       Eigen::VectorXd u_ref)
    : q_(std::move(q_diag)), r_(std::move(r_diag)), qT_(std::move(qT_diag)),
      z_refs_(std::move(z_refs)), u_ref_(std::move(u_ref)) {
    if (q_.size() != z_refs_.rows() || qT_.size() != q_.size() || r_.size() != u_ref_.size())
        throw ConfigError("objective: inconsistent weight/reference dimensions");
    if (z_refs_.cols() < 1) throw ConfigError("objective: need at least one reference column");
}

QuadraticObjective QuadraticObjective::from_config(const LqrConfig& cfg,
                                                   const BasisSpec& state_basis, int n_u,
                                                   Eigen::MatrixXd z_refs,
                                                   Eigen::VectorXd u_ref) {
    const int n_z = static_cast<int>(z_refs.rows());
    return QuadraticObjective(state_weight_diag(cfg, state_basis, n_z),
                              Eigen::VectorXd::Constant(n_u, cfg.weight_u),
                              Eigen::VectorXd::Constant(n_z, cfg.weight_terminal),
                              std::move(z_refs), std::move(u_ref));
}

double QuadraticObjective::l(const Eigen::Ref<const Eigen::VectorXd>& z,
                             const Eigen::Ref<const Eigen::VectorXd>& u, int k) const {
    const Eigen::VectorXd dz = z - z_ref(k);
    const Eigen::VectorXd du = u - u_ref_;
    return dz.dot(q_.cwiseProduct(dz)) + du.dot(r_.cwiseProduct(du));
}

Eigen::VectorXd QuadraticObjective::dl_dz(const Eigen::Ref<const Eigen::VectorXd>& z,
                                          int k) const {
    return 2.0 * q_.cwiseProduct(z - z_ref(k));
}

Eigen::VectorXd QuadraticObjective::dl_du(const Eigen::Ref<const Eigen::VectorXd>& u) const {
    return 2.0 * r_.cwiseProduct(u - u_ref_);
}

double QuadraticObjective::m(const Eigen::Ref<const Eigen::VectorXd>& zT) const {
    const Eigen::VectorXd dz = zT - z_refs_.col(z_refs_.cols() - 1);
    return dz.dot(qT_.cwiseProduct(dz));
}

Eigen::VectorXd QuadraticObjective::dm_dz(const Eigen::Ref<const Eigen::VectorXd>& zT) const {
    return 2.0 * qT_.cwiseProduct(zT - z_refs_.col(z_refs_.cols() - 1));
}

namespace {

// One RK4 step of xdot = f(x) with step h.
template <typename F>
Eigen::VectorXd rk4_step(const F& f, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = f(x);
    const Eigen::VectorXd k2 = f(x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = f(x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = f(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace

Rollout simulate_nominal(const ContinuousKoopman& cont, const LqrPolicy& policy,
                         const Eigen::VectorXd& z0, int H, double dt) {
    if (H < 1) throw ConfigError("simulate_nominal: H must be at least 1");
    if (!(dt > 0)) throw ConfigError("simulate_nominal: dt must be positive");
    const Eigen::Index n_z = cont.A.rows(), n_u = cont.B.cols();
    if (z0.size() != n_z) throw ConfigError("simulate_nominal: z0 dimension mismatch");

    Rollout out;
    out.dt = dt;
    out.z.resize(n_z, H + 1);
    out.u.resize(n_u, H);
    out.z.col(0) = z0;
    Eigen::VectorXd z = z0;
    for (int k = 0; k < H; ++k) {
        out.u.col(k) = policy.mu(z, k);
        const auto f = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
            return cont.A * zz + cont.B * policy.mu(zz, k);
        };
        z = rk4_step(f, z, dt);
        if (!z.allFinite())
            throw NumericalError("simulate_nominal: non-finite state at step " +
                                 std::to_string(k + 1) + " (model likely unstable)");
        out.z.col(k + 1) = z;
    }
    return out;
}

CostRollout rollout_cost(const ContinuousKoopman& cont, const LqrPolicy& policy,
                         const QuadraticObjective& obj, const Eigen::VectorXd& z0, int H,
                         double dt, const Eigen::VectorXd* u_insert, int insert_steps) {
    if (H < 1) throw ConfigError("rollout_cost: H must be at least 1");
    const Eigen::Index n_z = cont.A.rows(), n_u = cont.B.cols();
    if (z0.size() != n_z) throw ConfigError("rollout_cost: z0 dimension mismatch");
    if (insert_steps > 0 && (!u_insert || u_insert->size() != n_u))
        throw ConfigError("rollout_cost: insertion control has wrong dimension");

    CostRollout out;
    out.traj.dt = dt;
    out.traj.z.resize(n_z, H + 1);
    out.traj.u.resize(n_u, H);
    out.traj.z.col(0) = z0;

    // Augmented state [z; J] with Jdot = l(z, u(z), k).
    Eigen::VectorXd aug(n_z + 1);
    aug << z0, 0.0;
    for (int k = 0; k < H; ++k) {
        const bool inserted = k < insert_steps;
        const auto control = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
            return inserted ? *u_insert : policy.mu(zz, k);
        };
        out.traj.u.col(k) = control(aug.head(n_z));
        const auto f = [&](const Eigen::VectorXd& a) -> Eigen::VectorXd {
            const Eigen::VectorXd zz = a.head(n_z);
            const Eigen::VectorXd uu = control(zz);
            Eigen::VectorXd da(n_z + 1);
            da.head(n_z) = cont.A * zz + cont.B * uu;
            da[n_z] = obj.l(zz, uu, k);
            return da;
        };
        aug = rk4_step(f, aug, dt);
        if (!aug.allFinite())
            throw NumericalError("rollout_cost: non-finite state at step " + std::to_string(k + 1));
        out.traj.z.col(k + 1) = aug.head(n_z);
    }
    out.J1 = aug[n_z] + obj.m(out.traj.z.col(H));
    return out;
}

Eigen::MatrixXd sac_adjoint(const Rollout& traj, const ContinuousKoopman& cont,
                            const LqrPolicy& policy, const QuadraticObjective& obj) {
    const Eigen::Index n_z = cont.A.rows();
    const int H = static_cast<int>(traj.z.cols()) - 1;
    if (H < 1) throw ConfigError("sac_adjoint: trajectory too short");
    if (traj.z.rows() != n_z) throw ConfigError("sac_adjoint: trajectory dimension mismatch");

    const Eigen::MatrixXd dmu = policy.dmu_dz();                        // n_u x n_z
    const Eigen::MatrixXd AclT = (cont.A + cont.B * dmu).transpose();   // closed-loop Jacobian

    Eigen::MatrixXd rho(n_z, H + 1);
    rho.col(H) = obj.dm_dz(traj.z.col(H));

    // Backward sweep for rho alone. The state values the stages need come
    // from the forward pass: endpoints are stored rollout columns, the
    // midpoint is a forward half-step off z_k. Re-integrating z backward
    // would amplify the model's fast stable modes by R(|lambda| dt) per step
    // and blow up the costate on stiff fitted models.
    for (int k = H - 1; k >= 0; --k) {
        const auto fz = [&](const Eigen::VectorXd& zz) -> Eigen::VectorXd {
            return cont.A * zz + cont.B * policy.mu(zz, k);
        };
        const Eigen::VectorXd z_mid = rk4_step(fz, traj.z.col(k), 0.5 * traj.dt);

        const auto g = [&](const Eigen::VectorXd& rr, const Eigen::VectorXd& zz) {
            const Eigen::VectorXd uu = policy.mu(zz, k);
            return (-(obj.dl_dz(zz, k) + dmu.transpose() * obj.dl_du(uu)) - AclT * rr).eval();
        };
        const double h = -traj.dt;
        const Eigen::VectorXd& r1 = rho.col(k + 1);
        const Eigen::VectorXd k1 = g(r1, traj.z.col(k + 1));
        const Eigen::VectorXd k2 = g(r1 + 0.5 * h * k1, z_mid);
        const Eigen::VectorXd k3 = g(r1 + 0.5 * h * k2, z_mid);
        const Eigen::VectorXd k4 = g(r1 + h * k3, traj.z.col(k));
        rho.col(k) = r1 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!rho.col(k).allFinite())
            throw NumericalError("sac_adjoint: costate diverged at step " + std::to_string(k) +
                                 " (adjoint blow-up)");
    }
    return rho;
}

SacResult sac_action(const KoopmanModel& m, const Eigen::VectorXd& z,
                     const Eigen::MatrixXd& z_refs, const Eigen::VectorXd& u_ref,
                     const SacConfig& cfg, Eigen::MatrixXd* warm_P, const LqrPolicy* nominal) {
    cfg.validate();
    if (!m.has_control || m.n_g == 0)
        throw ConfigError("sac_action: model has no control channel");
    if (m.control_basis.kind != BasisKind::identity)
        throw ConfigError("sac_action: control lift must be identity so B acts on u directly");
    if (cfg.rbar.size() != m.n_g)
        throw ConfigError("sac_action: rbar has " + std::to_string(cfg.rbar.size()) +
                          " entries, model has " + std::to_string(m.n_g) + " controls");

    const ContinuousKoopman cont = to_continuous(m);
    const int H = cfg.steps();

    LqrPolicy policy;
    if (nominal) {
        policy = *nominal;
    } else {
        try {
            policy = lqr_nominal(cont, cfg.nominal, m.state_basis, z_refs, u_ref, warm_P);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("sac_action (nominal gain): ") + e.what());
        }
    }

    Rollout traj;
    try {
        traj = simulate_nominal(cont, policy, z, H, cfg.dt);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("sac_action (rollout): ") + e.what());
    }

    const QuadraticObjective obj = QuadraticObjective::from_config(
        cfg.nominal, m.state_basis, static_cast<int>(u_ref.size()), z_refs, u_ref);
    Eigen::MatrixXd rho;
    try {
        rho = sac_adjoint(traj, cont, policy, obj);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("sac_action (adjoint): ") + e.what());
    }

    SacResult res;
    res.rho0 = rho.col(0);
    res.u_nominal = policy.mu(z, 0);
    res.u_raw = res.u_nominal - cfg.rbar.cwiseInverse().asDiagonal() *
                                    (cont.B.transpose() * res.rho0);
    res.u = res.u_raw.cwiseMax(-cfg.u_max).cwiseMin(cfg.u_max);
    res.saturated = (res.u - res.u_raw).cwiseAbs().maxCoeff() > 0;
    res.mode_insertion = res.rho0.dot(cont.B * (res.u - res.u_nominal));
    return res;
}

SacResult sac_action(const KoopmanModel& m, const Eigen::VectorXd& z,
                     const Eigen::VectorXd& z_ref, const Eigen::VectorXd& u_ref,
                     const SacConfig& cfg, Eigen::MatrixXd* warm_P, const LqrPolicy* nominal) {
    return sac_action(m, z, Eigen::MatrixXd(z_ref), u_ref, cfg, warm_P, nominal);
}

} // namespace rkl
