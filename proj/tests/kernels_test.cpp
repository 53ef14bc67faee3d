#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pushgp/kernels.hpp"

namespace pushgp {
namespace {

// Entry-wise oracle written straight from the kernel definition.
double oracle_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& ls, double sf2) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < a.size(); ++d) s += (a(d) - b(d)) * (a(d) - b(d)) / (ls(d) * ls(d));
    return sf2 * std::exp(-0.5 * s);
}

KernelHyperparams random_hyp(std::mt19937_64& rng, int dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd ll(dim);
    for (int d = 0; d < dim; ++d) ll(d) = u(rng);
    return {ll, u(rng)};
}

Eigen::MatrixXd random_points(std::mt19937_64& rng, int n, int dim) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(n, dim);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < dim; ++d) X(i, d) = g(rng);
    return X;
}

TEST(ArdSe, ZeroDistanceGivesSignalVariance) {
    const auto hyp = KernelHyperparams::unit(3);
    const Eigen::Vector3d x(0.3, -2.0, 7.0);
    EXPECT_DOUBLE_EQ(ardse_eval(x, x, hyp), 1.0);
}

TEST(ArdSe, UnitDistanceValue) {
    const auto hyp = KernelHyperparams::unit(3);
    EXPECT_NEAR(ardse_eval(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0), hyp), 0.6065306597126334, 1e-15);
}

TEST(ArdSe, HugeLengthscalesGiveSignalVariance) {
    KernelHyperparams hyp(Eigen::Vector3d::Constant(30.0), std::log(2.5));
    EXPECT_NEAR(ardse_eval(Eigen::Vector3d(10, -40, 3), Eigen::Vector3d(-5, 2, 0), hyp), 2.5, 1e-9);
}

TEST(ArdSe, DimensionMismatchThrows) {
    const auto hyp = KernelHyperparams::unit(3);
    EXPECT_THROW(ardse_eval(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0), hyp), InputError);
    EXPECT_THROW(gram(Eigen::MatrixXd::Zero(4, 2), hyp), InputError);
    EXPECT_THROW(cross(Eigen::MatrixXd::Zero(4, 3), Eigen::Vector2d(0, 0), hyp), InputError);
}

TEST(ArdSe, SymmetricAndBounded) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto hyp = random_hyp(rng, 3);
        const Eigen::MatrixXd P = random_points(rng, 2, 3);
        const double k12 = ardse_eval(P.row(0).transpose(), P.row(1).transpose(), hyp);
        const double k21 = ardse_eval(P.row(1).transpose(), P.row(0).transpose(), hyp);
        EXPECT_EQ(k12, k21);
        EXPECT_GT(k12, 0.0);
        EXPECT_LE(k12, hyp.signal_variance());
    }
}

TEST(Gram, SingletonIsSignalVariance) {
    KernelHyperparams hyp(Eigen::Vector3d::Zero(), std::log(3.0));
    const Eigen::MatrixXd K = gram(Eigen::RowVector3d(1, 2, 3), hyp);
    ASSERT_EQ(K.rows(), 1);
    EXPECT_NEAR(K(0, 0), 3.0, 1e-15);
}

TEST(Gram, DuplicatedRowsGiveSignalVariance) {
    KernelHyperparams hyp(Eigen::Vector3d(0.1, -0.2, 0.3), std::log(1.7));
    Eigen::MatrixXd X(3, 3);
    X << 1, 2, 3, 0, 0, 0, 1, 2, 3;
    const Eigen::MatrixXd K = gram(X, hyp);
    EXPECT_NEAR(K(0, 2), 1.7, 1e-15);
    EXPECT_NEAR(K(2, 0), 1.7, 1e-15);
}

TEST(Gram, MatchesEntrywiseOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto hyp = random_hyp(rng, 3);
        const Eigen::MatrixXd X = random_points(rng, 3, 3);
        const Eigen::MatrixXd K = gram(X, hyp);
        const Eigen::VectorXd ls = hyp.log_lengthscales.array().exp();
        for (int i = 0; i < 3; ++i) {
            EXPECT_NEAR(K(i, i), hyp.signal_variance(), 1e-15);
            for (int j = 0; j < 3; ++j) {
                EXPECT_NEAR(K(i, j), oracle_kernel(X.row(i).transpose(), X.row(j).transpose(), ls, hyp.signal_variance()),
                            1e-13);
                EXPECT_EQ(K(i, j), K(j, i));
            }
        }
    }
}

TEST(Cross, MatchesOracleAndTrainingRow) {
    std::mt19937_64 rng(6);
    const auto hyp = random_hyp(rng, 3);
    const Eigen::MatrixXd X = random_points(rng, 5, 3);
    const Eigen::VectorXd ls = hyp.log_lengthscales.array().exp();
    const Eigen::VectorXd xs = random_points(rng, 1, 3).row(0).transpose();
    const Eigen::VectorXd k = cross(X, xs, hyp);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(k(i), oracle_kernel(X.row(i).transpose(), xs, ls, hyp.signal_variance()), 1e-13);

    const Eigen::VectorXd k2 = cross(X, X.row(2).transpose(), hyp);
    EXPECT_NEAR(k2(2), hyp.signal_variance(), 1e-15);

    const Eigen::VectorXd k1 = cross(X.topRows(1), xs, hyp);
    ASSERT_EQ(k1.size(), 1);
    EXPECT_DOUBLE_EQ(k1(0), ardse_eval(X.row(0).transpose(), xs, hyp));
}

TEST(GramGrad, LogSignalVarianceDerivativeIsK) {
    std::mt19937_64 rng(7);
    const auto hyp = random_hyp(rng, 3);
    const Eigen::MatrixXd X = random_points(rng, 4, 3);
    EXPECT_TRUE(gram_grad(X, hyp, 3).isApprox(gram(X, hyp), 1e-15));
}

TEST(GramGrad, LengthscaleDerivativeVanishesOnDiagonal) {
    std::mt19937_64 rng(8);
    const auto hyp = random_hyp(rng, 3);
    const Eigen::MatrixXd X = random_points(rng, 4, 3);
    for (int d = 0; d < 3; ++d) EXPECT_EQ(gram_grad(X, hyp, d).diagonal().cwiseAbs().maxCoeff(), 0.0);
}

TEST(GramGrad, IndexOutOfRangeThrows) {
    const auto hyp = KernelHyperparams::unit(3);
    EXPECT_THROW(gram_grad(Eigen::MatrixXd::Zero(2, 3), hyp, 4), InputError);
    EXPECT_THROW(gram_grad(Eigen::MatrixXd::Zero(2, 3), hyp, -1), InputError);
}

TEST(GramGrad, MatchesCentralDifferences) {
    std::mt19937_64 rng(9);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const auto hyp = random_hyp(rng, 3);
        const Eigen::MatrixXd X = random_points(rng, 4, 3);
        const double scale = hyp.signal_variance();
        for (int p = 0; p < 4; ++p) {
            Eigen::VectorXd v = hyp.to_vector();
            v(p) += h;
            const Eigen::MatrixXd Kp = gram(X, KernelHyperparams::from_vector(v));
            v(p) -= 2 * h;
            const Eigen::MatrixXd Km = gram(X, KernelHyperparams::from_vector(v));
            const Eigen::MatrixXd fd = (Kp - Km) / (2 * h);
            const Eigen::MatrixXd G = gram_grad(X, hyp, p);
            EXPECT_LT((G - fd).cwiseAbs().maxCoeff(), 1e-6 * scale);
            const double rel = (G - fd).cwiseAbs().maxCoeff() / std::max(1e-12, fd.cwiseAbs().maxCoeff());
            if (fd.cwiseAbs().maxCoeff() > 1e-3) EXPECT_LT(rel, 1e-5);
        }
    }
}

TEST(GramGrad, ContractionMatchesExplicitDerivatives) {
    std::mt19937_64 rng(10);
    const auto hyp = random_hyp(rng, 3);
    const Eigen::MatrixXd X = random_points(rng, 6, 3);
    const Eigen::MatrixXd W = Eigen::MatrixXd::Random(6, 6);
    const Eigen::MatrixXd K = gram(X, hyp);
    const Eigen::VectorXd c = gram_grad_contract(X, hyp, K, W);
    for (int p = 0; p < 4; ++p) EXPECT_NEAR(c(p), (W.array() * gram_grad(X, hyp, K, p).array()).sum(), 1e-12);
}

TEST(Jitter, JitteredGramFactorizesForLargeDuplicatedSets) {
    // Heavily duplicated inputs make the Gram matrix exactly singular.
    std::mt19937_64 rng(12);
    Eigen::MatrixXd X = random_points(rng, 50, 3);
    Eigen::MatrixXd Xd(2000, 3);
    for (int i = 0; i < 2000; ++i) Xd.row(i) = X.row(i % 50);
    const auto hyp = KernelHyperparams::unit(3);
    Eigen::MatrixXd K = gram(Xd, hyp);
    K.diagonal().array() += 1e-8;
    const JitteredCholesky c = jittered_cholesky(K, hyp.signal_variance());
    EXPECT_EQ(c.llt.info(), Eigen::Success);
    EXPECT_LE(c.jitter, 1e-4);
}

TEST(Jitter, IndefiniteMatrixReportsConditioningError) {
    Eigen::Matrix2d A;
    A << 1.0, 0.0, 0.0, -1.0;
    EXPECT_THROW(jittered_cholesky(A, 1.0), ConditioningError);
}

}  // namespace
}  // namespace pushgp
