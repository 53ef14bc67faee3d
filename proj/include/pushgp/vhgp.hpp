#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pushgp/errors.hpp"
#include "pushgp/gp.hpp"
#include "pushgp/kernels.hpp"
#include "pushgp/optim.hpp"
#include "pushgp/standardize.hpp"

namespace pushgp {

// Variational heteroscedastic GP.
//
// The observation model is y = f(x) + e, e ~ N(0, exp(g(x))), with independent
// GP priors f ~ GP(0, k_f) and g ~ GP(mu0, k_g). The variational posterior over
// g at the training inputs is N(mu, Sigma) with
//
//   mu    = K_g (Lambda - I/2) 1 + mu0 1
//   Sigma = (K_g^-1 + Lambda)^-1
//
// and the objective is the marginalized variational bound
//
//   F = log N(y | 0, K_f + R) - tr(Sigma)/4 - KL(N(mu, Sigma) || N(mu0 1, K_g)),
//   R_ii = exp(mu_i - Sigma_ii / 2).
//
// Sigma is evaluated through B = I + Lambda^1/2 K_g Lambda^1/2, which is
// always well conditioned; K_g is never inverted.
//
// Flat parameter layout: [theta_f (D+1), theta_g (D+1), mu0, log lambda (n)].

struct VHGPLayout {
    Eigen::Index dim;
    Eigen::Index n;

    Eigen::Index kernel_size() const { return dim + 1; }
    Eigen::Index f_offset() const { return 0; }
    Eigen::Index g_offset() const { return dim + 1; }
    Eigen::Index mu0_offset() const { return 2 * (dim + 1); }
    Eigen::Index lambda_offset() const { return 2 * (dim + 1) + 1; }
    Eigen::Index size() const { return lambda_offset() + n; }
};

struct VHGPPrediction {
    double mean = 0.0;               // a_*
    double latent_variance = 0.0;    // c_*^2
    double log_noise_mean = 0.0;     // b_*
    double log_noise_variance = 0.0; // d_*^2
    double noise_variance = 0.0;     // exp(b_* + d_*^2 / 2)
    double total_variance = 0.0;
    bool overflow = false;           // b_* + d_*^2/2 was clamped at 700
};

namespace detail {

constexpr double kLambdaFloor = 1e-12;
constexpr double kLogNoiseClamp = 700.0;

struct VHGPTerms {
    Eigen::MatrixXd Kf, Kg;
    Eigen::VectorXd lambda, sqrt_lambda, a;  // a = lambda - 1/2
    Eigen::LLT<Eigen::MatrixXd> llt_B;
    Eigen::MatrixXd Q;                        // L_B^-1 Lambda^1/2
    Eigen::MatrixXd V;                        // Q K_g
    Eigen::VectorXd mu, sigma_diag, R;
    JitteredCholesky chol_A;
    Eigen::VectorXd alpha;
    double value = 0.0;
};

inline VHGPTerms vhgp_terms(const Eigen::Ref<const Eigen::VectorXd>& params, const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& y) {
    const VHGPLayout lay{X.cols(), X.rows()};
    if (params.size() != lay.size()) throw InputError("VHGP: parameter vector has the wrong size");
    if (y.size() != lay.n) throw InputError("VHGP: X rows and y size differ");
    const Eigen::Index n = lay.n;
    VHGPTerms t;
    const KernelHyperparams kf = KernelHyperparams::from_vector(params.segment(lay.f_offset(), lay.kernel_size()));
    const KernelHyperparams kg = KernelHyperparams::from_vector(params.segment(lay.g_offset(), lay.kernel_size()));
    const double mu0 = params(lay.mu0_offset());
    t.Kf = gram(X, kf);
    t.Kg = gram(X, kg);
    t.lambda = params.segment(lay.lambda_offset(), n).array().exp().max(kLambdaFloor);
    t.sqrt_lambda = t.lambda.array().sqrt();
    t.a = t.lambda.array() - 0.5;

    Eigen::MatrixXd B = t.sqrt_lambda.asDiagonal() * t.Kg * t.sqrt_lambda.asDiagonal();
    B.diagonal().array() += 1.0;
    if (!B.allFinite()) throw ConditioningError("VHGP: non-finite B matrix");
    t.llt_B.compute(B);
    if (t.llt_B.info() != Eigen::Success) throw ConditioningError("VHGP: factorization of I + L^1/2 Kg L^1/2 failed");

    t.Q = Eigen::MatrixXd::Identity(n, n);
    t.llt_B.matrixL().solveInPlace(t.Q);
    const double tr_Binv = t.Q.squaredNorm();
    t.Q = t.Q * t.sqrt_lambda.asDiagonal();
    t.V.noalias() = t.Q.triangularView<Eigen::Lower>() * t.Kg;
    t.sigma_diag = t.Kg.diagonal() - t.V.colwise().squaredNorm().transpose();

    t.mu = t.Kg * t.a;
    t.mu.array() += mu0;
    t.R = (t.mu - 0.5 * t.sigma_diag).array().exp();

    Eigen::MatrixXd A = t.Kf;
    A.diagonal() += t.R;
    t.chol_A = jittered_cholesky(A, kf.signal_variance());
    t.alpha = t.chol_A.llt.solve(y);

    double logdet_A = 0.0, logdet_B = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        logdet_A += 2.0 * std::log(t.chol_A.llt.matrixLLT()(i, i));
        logdet_B += 2.0 * std::log(t.llt_B.matrixLLT()(i, i));
    }
    const double kl = 0.5 * (tr_Binv + t.a.dot(t.Kg * t.a) - static_cast<double>(n) + logdet_B);
    const double loglik =
        -0.5 * y.dot(t.alpha) - 0.5 * logdet_A - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    t.value = loglik - 0.25 * t.sigma_diag.sum() - kl;
    return t;
}

}  // namespace detail

/// Variational lower bound and its gradient with respect to the flat parameter
/// vector (see VHGPLayout). X and y are used as given (no standardization).
inline std::pair<double, Eigen::VectorXd> vhgp_bound(const Eigen::Ref<const Eigen::VectorXd>& params,
                                                     const Eigen::Ref<const Eigen::MatrixXd>& X,
                                                     const Eigen::Ref<const Eigen::VectorXd>& y) {
    const VHGPLayout lay{X.cols(), X.rows()};
    const Eigen::Index n = lay.n;
    const detail::VHGPTerms t = detail::vhgp_terms(params, X, y);
    const KernelHyperparams kf = KernelHyperparams::from_vector(params.segment(lay.f_offset(), lay.kernel_size()));
    const KernelHyperparams kg = KernelHyperparams::from_vector(params.segment(lay.g_offset(), lay.kernel_size()));

    // Likelihood term: W = alpha alpha^T - A^-1. Symmetric products are
    // accumulated in the lower triangle and mirrored afterwards.
    Eigen::MatrixXd L_inv = Eigen::MatrixXd::Identity(n, n);
    t.chol_A.llt.matrixL().solveInPlace(L_inv);
    Eigen::MatrixXd W = t.alpha * t.alpha.transpose();
    W.selfadjointView<Eigen::Lower>().rankUpdate(L_inv.transpose(), -1.0);
    W = W.selfadjointView<Eigen::Lower>();
    L_inv.resize(0, 0);

    // dF/dmu_i and dF/dSigma_ii from the likelihood and trace terms; the KL
    // term's Sigma-derivative (-Lambda/2) is folded into s.
    const Eigen::VectorXd wR = 0.5 * W.diagonal().cwiseProduct(t.R);
    const Eigen::VectorXd m = wR;
    const Eigen::VectorXd s = -0.5 * wR.array() - 0.25 + 0.5 * t.lambda.array();
    const Eigen::VectorXd m_minus_a = m - t.a;

    // C = (I + K_g Lambda)^-1 = I - V^T Q.
    const Eigen::MatrixXd& Q = t.Q;
    Eigen::MatrixXd C = -(t.V.transpose() * Q.triangularView<Eigen::Lower>());
    C.diagonal().array() += 1.0;
    // Sigma = K_g - V^T V
    Eigen::MatrixXd Sigma = t.Kg;
    Sigma.selfadjointView<Eigen::Lower>().rankUpdate(t.V.transpose(), -1.0);
    Sigma = Sigma.selfadjointView<Eigen::Lower>();

    Eigen::MatrixXd QtQ = Eigen::MatrixXd::Zero(n, n);
    QtQ.selfadjointView<Eigen::Lower>().rankUpdate(Q.transpose(), -0.5);
    Eigen::MatrixXd G = QtQ.selfadjointView<Eigen::Lower>();
    QtQ.resize(0, 0);
    G.noalias() += t.a * m.transpose();
    G.noalias() -= 0.5 * t.a * t.a.transpose();
    G.noalias() += C.transpose() * (s.asDiagonal() * C);

    Eigen::VectorXd grad(lay.size());
    grad.segment(lay.f_offset(), lay.kernel_size()) = 0.5 * gram_grad_contract(X, kf, t.Kf, W);
    grad.segment(lay.g_offset(), lay.kernel_size()) = gram_grad_contract(X, kg, t.Kg, G);
    grad(lay.mu0_offset()) = m.sum();
    const Eigen::VectorXd dl =
        t.Kg * m_minus_a - Sigma.array().square().matrix() * s;
    grad.segment(lay.lambda_offset(), n) = dl.cwiseProduct(t.lambda);
    return {t.value, grad};
}

/// Trained VHGP for one scalar output. Immutable after construction.
class VHGPModel {
public:
    VHGPModel() = default;

    /// Conditions the model at fixed parameters. X, y in original units;
    /// params refer to the standardized space defined by `standardizer`.
    static VHGPModel condition(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                               const Eigen::Ref<const Eigen::VectorXd>& params, const Standardizer& standardizer) {
        if (X.rows() != y.size()) throw InputError("VHGPModel: X rows and y size differ");
        if (X.rows() < 1) throw InputError("VHGPModel: empty data");
        const VHGPLayout lay{X.cols(), X.rows()};
        if (params.size() != lay.size()) throw InputError("VHGPModel: parameter vector has the wrong size");
        if (!params.allFinite()) throw InputError("VHGPModel: non-finite parameters");
        VHGPModel mdl;
        mdl.params_ = params;
        mdl.standardizer_ = standardizer;
        mdl.X_raw_ = X;
        mdl.y_raw_ = y;
        mdl.X_ = standardizer.transform_inputs(X);
        const Eigen::VectorXd t = standardizer.transform_targets(y);
        mdl.kernel_f_ = KernelHyperparams::from_vector(params.segment(lay.f_offset(), lay.kernel_size()));
        mdl.kernel_g_ = KernelHyperparams::from_vector(params.segment(lay.g_offset(), lay.kernel_size()));
        mdl.mu0_ = params(lay.mu0_offset());
        detail::VHGPTerms terms = detail::vhgp_terms(params, mdl.X_, t);
        mdl.lambda_ = terms.lambda;
        mdl.sqrt_lambda_ = terms.sqrt_lambda;
        mdl.a_ = terms.a;
        mdl.R_ = terms.R;
        mdl.alpha_ = terms.alpha;
        mdl.llt_A_ = std::move(terms.chol_A.llt);
        mdl.llt_B_ = std::move(terms.llt_B);
        mdl.bound_ = terms.value;
        return mdl;
    }

    VHGPPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& xstar) const {
        VHGPPrediction p = predict_standardized(standardizer_.transform_input(xstar));
        const double s2 = standardizer_.target_scale * standardizer_.target_scale;
        p.mean = standardizer_.target_to_original(p.mean);
        p.latent_variance *= s2;
        p.noise_variance *= s2;
        p.total_variance *= s2;
        // b_* is the log noise variance; shift it into original units too.
        p.log_noise_mean += std::log(s2);
        return p;
    }

    VHGPPrediction predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& zstar) const {
        VHGPPrediction p;
        const Eigen::VectorXd kf = cross(X_, zstar, kernel_f_);
        p.mean = kf.dot(alpha_);
        const Eigen::VectorXd v = llt_A_.matrixL().solve(kf);
        p.latent_variance = std::max(0.0, kernel_f_.signal_variance() - v.squaredNorm());

        const Eigen::VectorXd kg = cross(X_, zstar, kernel_g_);
        p.log_noise_mean = kg.dot(a_) + mu0_;
        const Eigen::VectorXd u = llt_B_.matrixL().solve(sqrt_lambda_.cwiseProduct(kg));
        p.log_noise_variance = std::max(0.0, kernel_g_.signal_variance() - u.squaredNorm());

        double expo = p.log_noise_mean + 0.5 * p.log_noise_variance;
        if (expo > detail::kLogNoiseClamp) {
            expo = detail::kLogNoiseClamp;
            p.overflow = true;
        }
        p.noise_variance = std::exp(expo);
        p.total_variance = p.latent_variance + p.noise_variance;
        return p;
    }

    /// Gaussian log density of ystar under the predictive distribution, in
    /// original output units.
    double predictive_density(const Eigen::Ref<const Eigen::VectorXd>& xstar, double ystar) const {
        const VHGPPrediction p = predict(xstar);
        const double r = ystar - p.mean;
        return -0.5 * std::log(2.0 * std::numbers::pi * p.total_variance) - 0.5 * r * r / p.total_variance;
    }

    const KernelHyperparams& kernel_f() const { return kernel_f_; }
    const KernelHyperparams& kernel_g() const { return kernel_g_; }
    double mu0() const { return mu0_; }
    const Eigen::VectorXd& lambda() const { return lambda_; }
    const Eigen::VectorXd& noise_diagonal() const { return R_; }
    const Eigen::VectorXd& params() const { return params_; }
    const Standardizer& standardizer() const { return standardizer_; }
    const Eigen::MatrixXd& training_inputs() const { return X_raw_; }
    const Eigen::VectorXd& training_targets() const { return y_raw_; }
    double bound() const { return bound_; }

private:
    Eigen::VectorXd params_;
    KernelHyperparams kernel_f_, kernel_g_;
    double mu0_ = 0.0;
    Standardizer standardizer_;
    Eigen::MatrixXd X_raw_, X_;
    Eigen::VectorXd y_raw_;
    Eigen::VectorXd lambda_, sqrt_lambda_, a_, R_, alpha_;
    Eigen::LLT<Eigen::MatrixXd> llt_A_, llt_B_;
    double bound_ = 0.0;
};

struct VHGPFitOptions {
    GPFitOptions gp;                   // warm-start GP
    OptimConfig optim{.max_iterations = 200, .num_restarts = 1};
    double g_lengthscale_factor = 2.0;  // initial l_g = factor * l_f
    double g_signal_variance = 1.0;
};

/// Initial VHGP parameters from a fitted homoscedastic GP: kernel_f copied,
/// mu0 = log sigma^2, Lambda = I/2, l_g = 2 l_f, sigma_g^2 = 1.
inline Eigen::VectorXd vhgp_initial_params(const GPModel& gp, Eigen::Index n, const VHGPFitOptions& options = {}) {
    const Eigen::Index D = gp.kernel().dim();
    const VHGPLayout lay{D, n};
    Eigen::VectorXd x0(lay.size());
    x0.segment(lay.f_offset(), lay.kernel_size()) = gp.kernel().to_vector();
    x0.segment(lay.g_offset(), D) = gp.kernel().log_lengthscales.array() + std::log(options.g_lengthscale_factor);
    x0(lay.g_offset() + D) = std::log(options.g_signal_variance);
    x0(lay.mu0_offset()) = std::log(gp.noise_variance());
    x0.segment(lay.lambda_offset(), n).setConstant(std::log(0.5));
    return x0;
}

/// Trains a VHGP by maximizing the variational bound, warm-started from a GP fit.
inline VHGPModel fit_vhgp(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                          const VHGPFitOptions& options = {}) {
    if (X.rows() != y.size()) throw InputError("fit_vhgp: X rows and y size differ");
    if (X.rows() < 2) throw InputError("fit_vhgp: need at least 2 samples");
    const GPModel gp = fit_gp(X, y, options.gp);
    const Standardizer& st = gp.standardizer();
    const Eigen::MatrixXd Z = st.transform_inputs(X);
    const Eigen::VectorXd t = st.transform_targets(y);
    const Eigen::Index n = X.rows();
    const VHGPLayout lay{X.cols(), n};
    const Eigen::VectorXd x0 = vhgp_initial_params(gp, n, options);

    const Objective objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        auto [v, grad] = vhgp_bound(p, Z, t);
        g = -grad;
        return -v;
    };
    std::vector<bool> mask(static_cast<std::size_t>(lay.size()), false);
    for (Eigen::Index i = 0; i < lay.lambda_offset(); ++i) mask[static_cast<std::size_t>(i)] = true;
    const OptimResult res = minimize_with_restarts(objective, x0, options.optim, mask);
    return VHGPModel::condition(X, y, res.x, st);
}

}  // namespace pushgp
