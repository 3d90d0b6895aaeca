#include <doctest.h>

#include <random>

#include "rkl/edmd.hpp"
#include "rkl/env.hpp"
#include "rkl/errors.hpp"
#include "rkl/rls.hpp"

using namespace rkl;

namespace {

void random_cols(Eigen::MatrixXd& M, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index j = 0; j < M.cols(); ++j)
        for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, j) = g(rng);
}

} // namespace

TEST_CASE("streamed updates reproduce the batch fit") {
    std::mt19937_64 rng(17);
    const int d = 6, N0 = 40, M = 60;
    Eigen::MatrixXd Y(d, N0 + M), Ybar(d, N0 + M);
    random_cols(Y, rng);
    random_cols(Ybar, rng);
    const double ridge = 1e-6;

    KoopmanModel seed = fit_edmd(Y.leftCols(N0), Ybar.leftCols(N0), d, ridge);
    RlsState rls(seed);
    for (int k = 0; k < M; ++k) rls.update(Y.col(N0 + k), Ybar.col(N0 + k));

    KoopmanModel batch = fit_edmd(Y, Ybar, d, ridge);
    CHECK((rls.K() - batch.K).norm() <= 1e-10 * batch.K.norm());
    CHECK((rls.P() - batch.P).norm() <= 1e-10 * batch.P.norm());
    CHECK(rls.update_count() == M);
    CHECK(rls.sample_count() == N0 + M);
}

TEST_CASE("one update applies the rank-one formulas") {
    std::mt19937_64 rng(5);
    const int d = 4;
    Eigen::MatrixXd K0(d, d), P0(d, d);
    random_cols(K0, rng);
    Eigen::MatrixXd R(d, d);
    random_cols(R, rng);
    P0 = R * R.transpose() + Eigen::MatrixXd::Identity(d, d); // SPD
    Eigen::VectorXd alpha(d), beta(d);
    alpha << 1, -2, 0.5, 3;
    beta << 0.2, 0.4, -1, 2;

    RlsState rls(K0, P0);
    rls.update(alpha, beta);

    const double gamma = 1.0 / (1.0 + alpha.dot(P0 * alpha));
    Eigen::MatrixXd K1 = K0 + gamma * (beta - K0 * alpha) * (P0 * alpha).transpose();
    Eigen::MatrixXd P1 = P0 - gamma * (P0 * alpha) * (P0 * alpha).transpose();
    CHECK((rls.K() - K1).norm() <= 1e-13 * K1.norm());
    CHECK((rls.P() - P1).norm() <= 1e-13 * P1.norm());
    CHECK(gain_gamma(P0, alpha) == doctest::Approx(gamma).epsilon(1e-15));
}

TEST_CASE("P tracks the inverse of the accumulated Gramian") {
    std::mt19937_64 rng(23);
    const int d = 5;
    const double ridge = 0.5;
    Eigen::MatrixXd G = ridge * Eigen::MatrixXd::Identity(d, d);
    RlsState rls(Eigen::MatrixXd::Zero(d, d), G.inverse());
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        Eigen::VectorXd a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a[i] = g(rng);
            b[i] = g(rng);
        }
        rls.update(a, b);
        G += a * a.transpose();
    }
    CHECK((rls.P() * G - Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-9);
    CHECK((rls.P() - rls.P().transpose()).norm() == 0.0);
}

TEST_CASE("a zero snapshot leaves the state untouched") {
    Eigen::MatrixXd K0 = Eigen::MatrixXd::Random(3, 3);
    Eigen::MatrixXd P0 = Eigen::MatrixXd::Identity(3, 3);
    RlsState rls(K0, P0);
    rls.update(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3));
    CHECK((rls.K() - K0).norm() == 0.0);
    CHECK((rls.P() - P0).norm() == 0.0);
    CHECK(rls.update_count() == 0);
}

TEST_CASE("gain gamma follows its formula") {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(3, 3);
    Eigen::Vector3d e1(1, 0, 0);
    CHECK(gain_gamma(P, e1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(gain_gamma(P, Eigen::Vector3d::Zero()) == 1.0);
    CHECK(gain_gamma(2.0 * P, e1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("store writes the absolute sample count") {
    Eigen::MatrixXd Y(2, 30), Ybar(2, 30);
    std::mt19937_64 rng(3);
    random_cols(Y, rng);
    random_cols(Ybar, rng);
    KoopmanModel model = fit_edmd(Y, Ybar, 2, 0.0);
    CHECK(model.sample_count == 30);

    RlsState rls(model);
    rls.update(Y.col(0), Ybar.col(0));
    rls.update(Y.col(1), Ybar.col(1));
    rls.store(model);
    CHECK(model.sample_count == 32);
    rls.store(model); // idempotent
    CHECK(model.sample_count == 32);
    CHECK((model.K - rls.K()).norm() == 0.0);
    CHECK((model.P - rls.P()).norm() == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
    RlsState rls(Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS(rls.update(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), ConfigError);
    CHECK_THROWS_AS((void)RlsState(Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Identity(3, 3)),
                    ConfigError);
}

TEST_CASE("updates never allocate after construction") {
    // Behavioural stand-in: a long update stream on a moderate dimension
    // stays numerically stable and symmetric throughout.
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = 12;
    RlsState rls(Eigen::MatrixXd::Zero(d, d),
                 Eigen::MatrixXd::Identity(d, d) * 1e4);
    for (int k = 0; k < 5000; ++k) {
        Eigen::VectorXd a(d), b(d);
        for (int i = 0; i < d; ++i) {
            a[i] = g(rng);
            b[i] = 0.9 * a[i] + 0.01 * g(rng);
        }
        rls.update(a, b);
    }
    CHECK(rls.K().allFinite());
    CHECK((rls.P() - rls.P().transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rls.P());
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("model handoff hands over the freshest snapshot once") {
    ModelHandoff h;
    CHECK(h.take() == nullptr);
    CHECK(h.peek() == nullptr);

    KoopmanModel m;
    m.K = Eigen::MatrixXd::Identity(2, 2);
    m.P = Eigen::MatrixXd::Identity(2, 2);
    m.n_z = 2;
    h.publish(m);
    m.K *= 2.0;
    h.publish(m); // supersedes the first

    auto got = h.take();
    REQUIRE(got != nullptr);
    CHECK(got->K(0, 0) == 2.0);
    CHECK(h.take() == nullptr); // consumed
    CHECK(h.peek() != nullptr); // but still inspectable
}
