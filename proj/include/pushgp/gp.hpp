#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "pushgp/errors.hpp"
#include "pushgp/kernels.hpp"
#include "pushgp/optim.hpp"
#include "pushgp/standardize.hpp"

namespace pushgp {

struct GPPrediction {
    double mean = 0.0;
    double latent_variance = 0.0;  // c_*^2
    double total_variance = 0.0;   // c_*^2 + sigma^2
};

struct GPFitOptions {
    OptimConfig optim{.num_restarts = 3};
    double noise_floor = 1e-10;  // relative to the (standardized, unit) target variance
    bool standardize = true;
};

/// Negative log marginal likelihood of a zero-mean GP with ARD-SE kernel and
/// Gaussian noise, with its gradient.
///
/// params = [log l_0..log l_{D-1}, log sf2, log sn2]; the noise variance used is
/// exp(log sn2) + noise_floor.
inline std::pair<double, Eigen::VectorXd> nlml(const Eigen::Ref<const Eigen::VectorXd>& params,
                                               const Eigen::Ref<const Eigen::MatrixXd>& X,
                                               const Eigen::Ref<const Eigen::VectorXd>& y, double noise_floor = 0.0) {
    const Eigen::Index D = X.cols();
    const Eigen::Index n = X.rows();
    if (params.size() != D + 2) throw InputError("nlml: expected D + 2 parameters");
    if (y.size() != n) throw InputError("nlml: X rows and y size differ");
    if (n < 1) throw InputError("nlml: empty data");

    const KernelHyperparams hyp = KernelHyperparams::from_vector(params.head(D + 1));
    const double sn2_free = std::exp(params(D + 1));
    const Eigen::MatrixXd K = gram(X, hyp);
    Eigen::MatrixXd A = K;
    A.diagonal().array() += sn2_free + noise_floor;

    const JitteredCholesky chol = jittered_cholesky(A, hyp.signal_variance());
    const Eigen::VectorXd alpha = chol.llt.solve(y);
    const auto L = chol.llt.matrixL();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(chol.llt.matrixLLT()(i, i));

    const double value =
        0.5 * y.dot(alpha) + 0.5 * logdet + 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    // dNLML/dtheta = -0.5 * tr((alpha alpha^T - A^-1) dA/dtheta)
    Eigen::MatrixXd Ainv = Eigen::MatrixXd::Identity(n, n);
    L.solveInPlace(Ainv);
    Ainv = Ainv.transpose() * Ainv;
    Eigen::MatrixXd W = alpha * alpha.transpose() - Ainv;

    Eigen::VectorXd grad(D + 2);
    grad.head(D + 1) = -0.5 * gram_grad_contract(X, hyp, K, W);
    grad(D + 1) = -0.5 * sn2_free * W.trace();
    return {value, grad};
}

/// Trained homoscedastic GP for one scalar output. Immutable after construction.
class GPModel {
public:
    GPModel() = default;

    /// Conditions a GP with fixed hyperparameters on data given in original
    /// units. The standardizer is applied to both inputs and targets.
    static GPModel condition(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                             const KernelHyperparams& kernel, double noise_variance, const Standardizer& standardizer) {
        if (X.rows() != y.size()) throw InputError("GPModel: X rows and y size differ");
        if (X.rows() < 1) throw InputError("GPModel: empty data");
        if (!(noise_variance > 0.0)) throw InputError("GPModel: noise variance must be > 0");
        if (!kernel.finite()) throw InputError("GPModel: non-finite kernel hyperparameters");
        GPModel m;
        m.kernel_ = kernel;
        m.noise_variance_ = noise_variance;
        m.standardizer_ = standardizer;
        m.X_raw_ = X;
        m.y_raw_ = y;
        m.X_ = standardizer.transform_inputs(X);
        m.y_ = standardizer.transform_targets(y);
        Eigen::MatrixXd A = gram(m.X_, kernel);
        A.diagonal().array() += noise_variance;
        JitteredCholesky chol = jittered_cholesky(A, kernel.signal_variance());
        m.jitter_ = chol.jitter;
        m.llt_ = std::move(chol.llt);
        m.alpha_ = m.llt_.solve(m.y_);
        return m;
    }

    /// Predictive distribution at a query in original input units; returns
    /// mean and variances in original output units.
    GPPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& xstar) const {
        const GPPrediction z = predict_standardized(standardizer_.transform_input(xstar));
        return {standardizer_.target_to_original(z.mean), standardizer_.variance_to_original(z.latent_variance),
                standardizer_.variance_to_original(z.total_variance)};
    }

    GPPrediction predict_standardized(const Eigen::Ref<const Eigen::VectorXd>& zstar) const {
        const Eigen::VectorXd k = cross(X_, zstar, kernel_);
        GPPrediction p;
        p.mean = k.dot(alpha_);
        const Eigen::VectorXd v = llt_.matrixL().solve(k);
        p.latent_variance = std::max(0.0, kernel_.signal_variance() - v.squaredNorm());
        p.total_variance = p.latent_variance + noise_variance_;
        return p;
    }

    const KernelHyperparams& kernel() const { return kernel_; }
    double noise_variance() const { return noise_variance_; }
    double jitter() const { return jitter_; }
    const Standardizer& standardizer() const { return standardizer_; }
    const Eigen::MatrixXd& training_inputs() const { return X_raw_; }
    const Eigen::VectorXd& training_targets() const { return y_raw_; }
    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return llt_; }
    double objective() const { return objective_; }
    void set_objective(double v) { objective_ = v; }

private:
    KernelHyperparams kernel_;
    double noise_variance_ = 1.0;
    double jitter_ = 0.0;
    double objective_ = 0.0;
    Standardizer standardizer_;
    Eigen::MatrixXd X_raw_, X_;
    Eigen::VectorXd y_raw_, y_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
};

/// Trains a GP by minimizing the negative log marginal likelihood from the
/// scale-aware initialization (unit lengthscales and signal variance in
/// standardized space, noise at 1% of the target variance).
inline GPModel fit_gp(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                      const GPFitOptions& options = {}) {
    if (X.rows() != y.size()) throw InputError("fit_gp: X rows and y size differ");
    if (X.rows() < 2) throw InputError("fit_gp: need at least 2 samples");
    if (!X.allFinite() || !y.allFinite()) throw InputError("fit_gp: non-finite data");
    const Eigen::Index D = X.cols();
    const Standardizer st = options.standardize ? Standardizer::fit(X, y) : Standardizer::identity(D);
    const Eigen::MatrixXd Z = st.transform_inputs(X);
    const Eigen::VectorXd t = st.transform_targets(y);

    // Initialization from data scales, in the standardized space.
    const double n = static_cast<double>(Z.rows());
    Eigen::VectorXd x0(D + 2);
    for (Eigen::Index d = 0; d < D; ++d) {
        const double var = (Z.col(d).array() - Z.col(d).mean()).square().sum() / n;
        x0(d) = var > 0.0 ? 0.5 * std::log(var) : 0.0;
    }
    const double tvar = (t.array() - t.mean()).square().sum() / n;
    const double target_var = tvar > 0.0 ? tvar : 1.0;
    x0(D) = std::log(target_var);
    x0(D + 1) = std::log(0.01 * target_var);
    const double floor = options.noise_floor * target_var;

    const Objective objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
        auto [v, grad] = nlml(p, Z, t, floor);
        g = grad;
        return v;
    };
    const OptimResult res = minimize_with_restarts(objective, x0, options.optim);

    const KernelHyperparams hyp = KernelHyperparams::from_vector(res.x.head(D + 1));
    GPModel model = GPModel::condition(X, y, hyp, std::exp(res.x(D + 1)) + floor, st);
    model.set_objective(res.f);
    return model;
}

}  // namespace pushgp
