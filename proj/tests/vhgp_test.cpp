#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pushgp/vhgp.hpp"

namespace pushgp {
namespace {

using namespace oracle;

TEST(VhgpBound, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 5 + trial;
        const Eigen::MatrixXd X = random_points(rng, n, 3);
        const Eigen::VectorXd y = random_points(rng, n, 1).col(0);
        const Eigen::VectorXd p = random_params(rng, 3, n);
        const Objective f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
            auto [v, grad] = vhgp_bound(q, X, y);
            g = grad;
            return v;
        };
        EXPECT_LT(grad_check(f, p, 1e-5), 1e-4) << "trial " << trial;
    }
}

TEST(VhgpBound, BelowHomoscedasticEvidenceForConstantNoise) {
    std::mt19937_64 rng(22);
    std::normal_distribution<double> g;
    const int n = 40;
    Eigen::MatrixXd X = random_points(rng, n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = std::sin(2.0 * X(i, 0)) + 0.2 * g(rng);
    GPFitOptions opt;
    opt.standardize = false;
    const GPModel gp = fit_gp(X, y, opt);
    const double best_evidence = -gp.objective();

    const VHGPLayout lay{1, n};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd p(lay.size());
        p.head(2) = gp.kernel().to_vector();
        p(2) = u(rng);
        p(3) = -20.0;  // g-kernel variance -> 0
        p(lay.mu0_offset()) = std::log(gp.noise_variance()) + 0.5 * u(rng);
        for (int i = 0; i < n; ++i) p(lay.lambda_offset() + i) = std::log(0.5) + u(rng);
        EXPECT_LE(vhgp_bound(p, X, y).first, best_evidence + 1e-6);
    }
}

TEST(VhgpPredict, FlatLambdaGivesPriorLogNoiseMean) {
    std::mt19937_64 rng(23);
    const int n = 6;
    const Eigen::MatrixXd X = random_points(rng, n, 3);
    const Eigen::VectorXd y = random_points(rng, n, 1).col(0);
    Eigen::VectorXd p = random_params(rng, 3, n);
    const VHGPLayout lay{3, n};
    p.segment(lay.lambda_offset(), n).setConstant(std::log(0.5));
    const VHGPModel m = VHGPModel::condition(X, y, p, Standardizer::identity(3));
    for (int q = 0; q < 5; ++q) {
        const VHGPPrediction pr = m.predict_standardized(random_points(rng, 1, 3).row(0).transpose());
        EXPECT_NEAR(pr.log_noise_mean, p(lay.mu0_offset()), 1e-14);
    }
}

TEST(VhgpPredict, MatchesNaiveDenseEquations) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 6;
        const Eigen::MatrixXd X = random_points(rng, n, 3);
        const Eigen::VectorXd y = random_points(rng, n, 1).col(0);
        const Eigen::VectorXd p = random_params(rng, 3, n);
        const VHGPModel m = VHGPModel::condition(X, y, p, Standardizer::identity(3));
        for (int q = 0; q < 4; ++q) {
            const Eigen::VectorXd xs = random_points(rng, 1, 3).row(0).transpose();
            const NaiveVhgp ref = naive_vhgp(X, y, p, xs);
            const VHGPPrediction pr = m.predict_standardized(xs);
            EXPECT_NEAR(pr.mean, ref.a, 1e-8);
            EXPECT_NEAR(pr.latent_variance, ref.c2, 1e-8);
            EXPECT_NEAR(pr.log_noise_mean, ref.b, 1e-8);
            EXPECT_NEAR(pr.log_noise_variance, ref.d2, 1e-8);
            EXPECT_GT(pr.total_variance, 0.0);
        }
    }
}

TEST(VhgpPredict, FarFromDataLimit) {
    std::mt19937_64 rng(25);
    const int n = 8;
    Eigen::MatrixXd X = random_points(rng, n, 3);
    Eigen::VectorXd y = random_points(rng, n, 1).col(0);
    X.col(0) = X.col(0) * 10.0 + Eigen::VectorXd::Constant(n, 40.0);
    y = (y * 3.0).array() + 1.0;
    const Eigen::VectorXd p = random_params(rng, 3, n);
    const Standardizer st = Standardizer::fit(X, y);
    const VHGPModel m = VHGPModel::condition(X, y, p, st);
    const VHGPPrediction pr = m.predict(Eigen::Vector3d(1e4, -1e4, 1e4));
    const double sf2 = m.kernel_f().signal_variance();
    const double sg2 = m.kernel_g().signal_variance();
    const double s2 = st.target_scale * st.target_scale;
    EXPECT_NEAR(pr.total_variance, (sf2 + std::exp(m.mu0() + 0.5 * sg2)) * s2, 1e-6);
    EXPECT_NEAR(pr.mean, st.target_mean, 1e-6);
    const VHGPPrediction zs = m.predict_standardized(st.transform_input(Eigen::Vector3d(1e4, -1e4, 1e4)));
    EXPECT_NEAR(zs.log_noise_mean, m.mu0(), 1e-12);
    EXPECT_NEAR(zs.log_noise_variance, sg2, 1e-12);
}

TEST(VhgpPredict, ReducesToGpWhenNoiseProcessIsFlat) {
    std::mt19937_64 rng(26);
    const int n = 10;
    const Eigen::MatrixXd X = random_points(rng, n, 3);
    const Eigen::VectorXd y = random_points(rng, n, 1).col(0);
    const VHGPLayout lay{3, n};
    Eigen::VectorXd p = random_params(rng, 3, n);
    p(lay.g_offset() + 3) = -30.0;
    p.segment(lay.lambda_offset(), n).setConstant(std::log(0.5));
    const double mu0 = p(lay.mu0_offset());
    const VHGPModel vm = VHGPModel::condition(X, y, p, Standardizer::identity(3));
    const GPModel gm = GPModel::condition(X, y, KernelHyperparams::from_vector(p.head(4)), std::exp(mu0),
                                          Standardizer::identity(3));
    for (int q = 0; q < 5; ++q) {
        const Eigen::VectorXd xs = random_points(rng, 1, 3).row(0).transpose();
        const VHGPPrediction a = vm.predict(xs);
        const GPPrediction b = gm.predict(xs);
        EXPECT_NEAR(a.mean, b.mean, 1e-6);
        EXPECT_NEAR(a.total_variance, b.total_variance, 1e-6);
    }
}

TEST(VhgpDensity, GaussianIdentities) {
    // One training point far away so the prediction is the prior, arranged to
    // have unit total variance: sf2 = 0.5, exp(mu0 + sg2/2) = 0.5.
    Eigen::MatrixXd X(2, 1);
    X << -1e3, 1e3;
    const Eigen::VectorXd y = Eigen::Vector2d(0.3, -0.3);
    const VHGPLayout lay{1, 2};
    Eigen::VectorXd p(lay.size());
    const double sg2 = 0.2;
    p << 0.0, std::log(0.5), 0.0, std::log(sg2), std::log(0.5) - 0.5 * sg2, std::log(0.5), std::log(0.5);
    const VHGPModel m = VHGPModel::condition(X, y, p, Standardizer::identity(1));
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
    const VHGPPrediction pr = m.predict(x0);
    ASSERT_NEAR(pr.total_variance, 1.0, 1e-12);
    EXPECT_NEAR(m.predictive_density(x0, pr.mean), -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(m.predictive_density(x0, pr.mean), -0.9189385332046727, 1e-12);

    std::mt19937_64 rng(27);
    const Eigen::VectorXd yy = random_points(rng, 10, 1).col(0);
    const Eigen::MatrixXd XX = random_points(rng, 10, 1);
    const Standardizer st = Standardizer::fit(XX, (yy * 2.5).array() + 3.0);
    const VHGPModel m2 =
        VHGPModel::condition(XX, (yy * 2.5).array() + 3.0, random_params(rng, 1, 10), st);
    const Eigen::VectorXd xq = Eigen::VectorXd::Constant(1, 0.2);
    const VHGPPrediction q = m2.predict(xq);
    const double sd = std::sqrt(q.total_variance);
    for (double sign : {-1.0, 1.0}) {
        EXPECT_NEAR(m2.predictive_density(xq, q.mean + sign * sd),
                    -0.5 * std::log(2.0 * std::numbers::pi * q.total_variance) - 0.5, 1e-12);
    }
    // Simpson quadrature over +-8 standard deviations.
    const int N = 4000;
    const double lo = q.mean - 8 * sd, hi = q.mean + 8 * sd, h = (hi - lo) / N;
    double integral = 0.0;
    for (int i = 0; i <= N; ++i) {
        const double w = (i == 0 || i == N) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        integral += w * std::exp(m2.predictive_density(xq, lo + i * h));
    }
    integral *= h / 3.0;
    EXPECT_NEAR(integral, 1.0, 1e-6);
}

TEST(VhgpFit, TwoPointSmoke) {
    Eigen::MatrixXd X(2, 3);
    X << 1, 2, 3, 2, 1, 0;
    const VHGPModel m = fit_vhgp(X, Eigen::Vector2d(0.5, -0.25));
    EXPECT_TRUE(m.params().allFinite());
    EXPECT_GT(m.predict(Eigen::Vector3d(0, 0, 0)).total_variance, 0.0);
}

TEST(VhgpFit, BoundNonDecreasingAlongIterates) {
    std::mt19937_64 rng(28);
    std::normal_distribution<double> g;
    const int n = 60;
    Eigen::MatrixXd X = random_points(rng, n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = std::sin(X(i, 0)) + (0.05 + 0.2 * std::abs(X(i, 0))) * g(rng);
    const GPModel gp = fit_gp(X, y);
    const Eigen::MatrixXd Z = gp.standardizer().transform_inputs(X);
    const Eigen::VectorXd t = gp.standardizer().transform_targets(y);
    const Objective f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
        auto [v, gr] = vhgp_bound(p, Z, t);
        grad = -gr;
        return -v;
    };
    const OptimResult r = minimize(f, vhgp_initial_params(gp, n), {});
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i], r.trace[i - 1]);
    EXPECT_LT(r.f, r.trace.front());
}

TEST(VhgpFit, RecoversHeteroscedasticNoise) {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const int n = 500;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    auto sigma = [](double x) { return 0.05 + 0.25 * x; };
    for (int i = 0; i < n; ++i) {
        X(i, 0) = u(rng);
        y(i) = 2.0 * std::sin(2.0 * std::numbers::pi * X(i, 0)) + sigma(X(i, 0)) * g(rng);
    }
    const VHGPModel m = fit_vhgp(X, y);
    int within = 0;
    for (int k = 0; k < 100; ++k) {
        const double x = (k + 0.5) / 100.0;
        const double s = std::sqrt(m.predict(Eigen::VectorXd::Constant(1, x)).noise_variance);
        if (std::abs(s - sigma(x)) <= 0.3 * sigma(x)) ++within;
    }
    EXPECT_GE(within, 90);
}

TEST(VhgpFit, ConstantNoiseWithinFactorTwo) {
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g;
    const int n = 300;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = u(rng);
        y(i) = std::cos(3.0 * X(i, 0)) + 0.1 * g(rng);
    }
    const VHGPModel m = fit_vhgp(X, y);
    for (int k = 0; k < 50; ++k) {
        const double v = m.predict(Eigen::VectorXd::Constant(1, (k + 0.5) / 50.0)).noise_variance;
        EXPECT_GT(v, 0.01 / 2.0);
        EXPECT_LT(v, 0.01 * 2.0);
    }
}

}  // namespace
}  // namespace pushgp
