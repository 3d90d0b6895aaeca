#include <doctest.h>

#include <cmath>
#include <random>

#include "rkl/env.hpp"
#include "rkl/errors.hpp"

using namespace rkl;

namespace {

ArmParams undamped() {
    ArmParams p;
    p.damping = 0.0;
    return p;
}

// Mass matrix from the rod parameters, written out independently of the
// simulator's internals.
Eigen::Matrix2d mass_matrix(const Eigen::Vector2d& q, const ArmParams& p) {
    const double lc1 = p.l1 / 2, lc2 = p.l2 / 2;
    const double I1 = p.m1 * p.l1 * p.l1 / 12.0, I2 = p.m2 * p.l2 * p.l2 / 12.0;
    const double a1 = I1 + p.m1 * lc1 * lc1 + p.m2 * p.l1 * p.l1;
    const double a2 = I2 + p.m2 * lc2 * lc2;
    const double a3 = p.m2 * p.l1 * lc2;
    const double c2 = std::cos(q[1]);
    Eigen::Matrix2d M;
    M << a1 + a2 + 2 * a3 * c2, a2 + a3 * c2, a2 + a3 * c2, a2;
    return M;
}

} // namespace

TEST_CASE("a resting arm with no torque stays at rest") {
    ArmParams p; // damping only acts on motion
    ArmState s{{0.7, -1.2}, {0.0, 0.0}};
    CHECK(arm_accel(s, Eigen::Vector2d::Zero(), p).norm() == 0.0);
    ArmState next = arm_step(s, Eigen::Vector2d::Zero(), p);
    CHECK((next.q - s.q).norm() == 0.0);
    CHECK(next.qdot.norm() == 0.0);
}

TEST_CASE("acceleration at rest is the inverse mass matrix times torque") {
    ArmParams p = undamped();
    Eigen::Vector2d u(0.3, -0.1);
    for (double q2 : {-1.0, 0.0, 0.5, 2.0}) {
        ArmState s{{0.4, q2}, {0.0, 0.0}};
        Eigen::Vector2d want = mass_matrix(s.q, p).ldlt().solve(u);
        Eigen::Vector2d got = arm_accel(s, u, p);
        CHECK((got - want).norm() <= 1e-12 * want.norm());
    }
}

TEST_CASE("a small integration step reproduces the instantaneous acceleration") {
    ArmParams p;
    p.dt = 1e-7;
    ArmState s{{0.3, -0.8}, {1.5, -2.0}};
    Eigen::Vector2d u(0.2, 0.1);
    Eigen::Vector2d accel = arm_accel(s, u, p);
    ArmState next = arm_step(s, u, p);
    Eigen::Vector2d fd = (next.qdot - s.qdot) / p.dt;
    CHECK((fd - accel).norm() <= 1e-4 * accel.norm());
}

TEST_CASE("kinetic energy is conserved without damping or torque") {
    ArmParams p = undamped();
    ArmState s{{0.2, 0.9}, {2.0, -1.5}};
    const double e0 = arm_kinetic_energy(s, p);
    REQUIRE(e0 > 0.0);
    for (int k = 0; k < 1000; ++k) s = arm_step(s, Eigen::Vector2d::Zero(), p);
    CHECK(std::abs(arm_kinetic_energy(s, p) - e0) / e0 <= 1e-6);
}

TEST_CASE("damping strictly dissipates energy") {
    ArmParams p; // default damping 0.01
    ArmState s{{0.0, 0.5}, {3.0, -2.0}};
    double prev = arm_kinetic_energy(s, p);
    for (int k = 0; k < 50; ++k) {
        s = arm_step(s, Eigen::Vector2d::Zero(), p);
        double e = arm_kinetic_energy(s, p);
        CHECK(e < prev);
        prev = e;
    }
}

TEST_CASE("reward is zero on target and scales with the documented gains") {
    ArmState on{{0.3, -0.2}, {1.0, 0.5}};
    CHECK(arm_reward(on, Eigen::Vector2d::Zero(), on.q, on.qdot) == 0.0);

    // Unit position error: -100. Velocity error norm 0.05: -0.5.
    ArmState off{{1.3, -0.2}, {1.0, 0.55}};
    CHECK(arm_reward(off, Eigen::Vector2d::Zero(), on.q, on.qdot) ==
          doctest::Approx(-100.0 - 0.5).epsilon(1e-12));

    // Torque enters squared per channel.
    CHECK(arm_reward(on, Eigen::Vector2d(1.0, 2.0), on.q, on.qdot) ==
          doctest::Approx(-5.0).epsilon(1e-12));
}

TEST_CASE("figure eight hits its landmark points") {
    const double T = 5.0;
    CHECK((figure8_reference(0.0, T) - Eigen::Vector2d(0.1, 0.1)).norm() <= 1e-15);
    CHECK((figure8_reference(T / 2, T) - Eigen::Vector2d(0.1, -0.1)).norm() <= 1e-12);
    Eigen::Vector2d eighth = figure8_reference(T / 8, T);
    CHECK(eighth[0] == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(eighth[1] == doctest::Approx(0.1 * std::cos(M_PI / 4)).epsilon(1e-12));
    // Periodic.
    CHECK((figure8_reference(T + 0.3, T) - figure8_reference(0.3, T)).norm() <= 1e-9);
}

TEST_CASE("forward kinematics lands known poses") {
    ArmParams p;
    CHECK((arm_fk({0.0, 0.0}, p) - Eigen::Vector2d(0.2, 0.0)).norm() <= 1e-15);
    CHECK((arm_fk({M_PI / 2, 0.0}, p) - Eigen::Vector2d(0.0, 0.2)).norm() <= 1e-15);
    CHECK((arm_fk({0.0, M_PI / 2}, p) - Eigen::Vector2d(0.1, 0.1)).norm() <= 1e-15);
}

TEST_CASE("inverse kinematics inverts the landmark poses") {
    ArmParams p;
    CHECK((arm_ik({0.2, 0.0}, p) - Eigen::Vector2d(0.0, 0.0)).norm() <= 1e-12);
    CHECK((arm_ik({0.0, 0.2}, p) - Eigen::Vector2d(M_PI / 2, 0.0)).norm() <= 1e-12);
    CHECK((arm_ik({0.1, 0.1}, p, Elbow::down) - Eigen::Vector2d(0.0, M_PI / 2)).norm() <= 1e-12);
    // The mirror solution bends the other way.
    Eigen::Vector2d up = arm_ik({0.1, 0.1}, p, Elbow::up);
    CHECK(up[1] == doctest::Approx(-M_PI / 2).epsilon(1e-12));
    CHECK((arm_fk(up, p) - Eigen::Vector2d(0.1, 0.1)).norm() <= 1e-12);
}

TEST_CASE("ik then fk round trips across the reachable disk") {
    ArmParams p;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> radius(0.02, 0.198);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    for (int k = 0; k < 2000; ++k) {
        const double r = radius(rng), th = angle(rng);
        Eigen::Vector2d tip(r * std::cos(th), r * std::sin(th));
        for (Elbow e : {Elbow::down, Elbow::up}) {
            Eigen::Vector2d q = arm_ik(tip, p, e);
            CHECK((arm_fk(q, p) - tip).norm() <= 1e-12);
        }
    }
}

TEST_CASE("unreachable targets are rejected") {
    ArmParams p;
    CHECK_THROWS_AS((void)arm_ik({0.3, 0.0}, p), ConfigError);
}

TEST_CASE("elbow-down solutions keep q2 in the upper branch") {
    ArmParams p;
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> radius(0.02, 0.198);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    for (int k = 0; k < 200; ++k) {
        const double r = radius(rng), th = angle(rng);
        Eigen::Vector2d q = arm_ik({r * std::cos(th), r * std::sin(th)}, p, Elbow::down);
        CHECK(q[1] >= 0.0);
        CHECK(q[1] <= M_PI);
    }
}

TEST_CASE("joint reference tracks the figure eight with consistent velocities") {
    ArmParams p;
    const double T = 5.0, dt = 0.01;
    auto refs = reference_joint_traj(T, dt, p);
    REQUIRE(refs.size() == 500);
    for (int k : {0, 123, 250, 499}) {
        Eigen::Vector2d want = figure8_reference(k * dt, T);
        CHECK((arm_fk(refs[static_cast<std::size_t>(k)].q_d, p) - want).norm() <= 1e-12);
    }
    // Interior velocities are central differences of the angle sequence.
    for (int k : {1, 100, 498}) {
        auto& r = refs[static_cast<std::size_t>(k)];
        Eigen::Vector2d fd =
            (refs[static_cast<std::size_t>(k + 1)].q_d - refs[static_cast<std::size_t>(k - 1)].q_d) /
            (2 * dt);
        CHECK((r.qdot_d - fd).norm() <= 1e-12);
    }
}

TEST_CASE("initial states sample the documented box") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 500; ++k) {
        ArmState s = sample_arm_init(rng);
        CHECK(s.q.cwiseAbs().maxCoeff() <= 0.1);
        CHECK(s.qdot.cwiseAbs().maxCoeff() <= 0.005);
    }
}

TEST_CASE("arm params are validated") {
    ArmParams p;
    p.l1 = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = ArmParams{};
    p.dt = -0.01;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("chain sampling is deterministic and chains from the origin") {
    ChainSpec spec;
    spec.n = 3;
    spec.A = random_stable_matrix(3, 0.8, 42);
    spec.noise_cov = Eigen::MatrixXd::Identity(3, 3);
    spec.seed = 9;

    SnapshotDataset a = chain_sample(spec, 200);
    SnapshotDataset b = chain_sample(spec, 200);
    REQUIRE(a.size() == 200);
    CHECK(a.n_u == 0);
    CHECK(a.records[0].x.norm() == 0.0);
    a.validate_chaining();
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK((a.records[k].x - b.records[k].x).norm() == 0.0);
        CHECK((a.records[k].x_next - b.records[k].x_next).norm() == 0.0);
    }

    spec.seed = 10;
    SnapshotDataset c = chain_sample(spec, 200);
    CHECK((a.records[5].x_next - c.records[5].x_next).norm() > 0.0);
}

TEST_CASE("with A = 0 the chain draws i.i.d. noise of the requested covariance") {
    ChainSpec spec;
    spec.n = 2;
    spec.A = Eigen::MatrixXd::Zero(2, 2);
    Eigen::Matrix2d W;
    W << 2.0, 0.5, 0.5, 1.0;
    spec.noise_cov = W;
    spec.seed = 17;
    const int N = 20000;
    SnapshotDataset ds = chain_sample(spec, N);
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& r : ds.records) mean += r.x_next;
    mean /= N;
    for (const auto& r : ds.records) {
        Eigen::Vector2d d = r.x_next - mean;
        cov += d * d.transpose();
    }
    cov /= N - 1;
    CHECK(mean.norm() <= 0.05);
    CHECK((cov - W).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("chain spec validation rejects unstable or degenerate inputs") {
    ChainSpec spec;
    spec.n = 2;
    spec.A = Eigen::MatrixXd::Identity(2, 2); // spectral radius 1
    spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec.A *= 0.5;
    spec.noise_cov(0, 0) = -1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);

    spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
    spec.validate();
}

TEST_CASE("random stable matrices hit the requested spectral radius") {
    for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
        Eigen::MatrixXd A = random_stable_matrix(5, 0.9, seed);
        CHECK(spectral_radius(A) == doctest::Approx(0.9).epsilon(1e-10));
    }
    Eigen::MatrixXd a = random_stable_matrix(4, 0.5, 1);
    Eigen::MatrixXd b = random_stable_matrix(4, 0.5, 1);
    Eigen::MatrixXd c = random_stable_matrix(4, 0.5, 2);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() > 0.0);
}

TEST_CASE("stationary covariance satisfies its fixed-point equation") {
    Eigen::MatrixXd A = random_stable_matrix(4, 0.85, 5);
    Eigen::MatrixXd W = Eigen::MatrixXd::Identity(4, 4) * 0.3;
    Eigen::MatrixXd S = lyapunov_stationary_cov(A, W);
    CHECK((A * S * A.transpose() + W - S).norm() <= 1e-12 * S.norm());
    // Scalar case has the closed form w / (1 - a^2).
    Eigen::MatrixXd a1(1, 1), w1(1, 1);
    a1 << 0.7;
    w1 << 2.0;
    CHECK(lyapunov_stationary_cov(a1, w1)(0, 0) ==
          doctest::Approx(2.0 / (1 - 0.49)).epsilon(1e-12));
}

TEST_CASE("long chains approach the stationary covariance") {
    ChainSpec spec;
    spec.n = 2;
    spec.A = random_stable_matrix(2, 0.6, 21);
    spec.noise_cov = Eigen::MatrixXd::Identity(2, 2);
    spec.seed = 4;
    const int N = 50000;
    SnapshotDataset ds = chain_sample(spec, N);
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& r : ds.records) cov += r.x_next * r.x_next.transpose();
    cov /= N;
    Eigen::MatrixXd S = lyapunov_stationary_cov(spec.A, spec.noise_cov);
    CHECK((cov - S).norm() <= 0.05 * S.norm());
}
