#pragma once

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pushgp/errors.hpp"

namespace pushgp {

/// Hyperparameters of the ARD squared-exponential kernel
///
///   k(x, x') = sf2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
///
/// stored in log space. The flat parameter layout used by gradients and
/// optimizers is [log l_0, ..., log l_{D-1}, log sf2].
struct KernelHyperparams {
    Eigen::VectorXd log_lengthscales;
    double log_signal_variance = 0.0;

    KernelHyperparams() = default;
    KernelHyperparams(Eigen::VectorXd log_ls, double log_sf2)
        : log_lengthscales(std::move(log_ls)), log_signal_variance(log_sf2) {}

    static KernelHyperparams unit(Eigen::Index dim) {
        return {Eigen::VectorXd::Zero(dim), 0.0};
    }

    Eigen::Index dim() const { return log_lengthscales.size(); }
    Eigen::Index num_params() const { return dim() + 1; }
    double signal_variance() const { return std::exp(log_signal_variance); }

    Eigen::VectorXd to_vector() const {
        Eigen::VectorXd v(num_params());
        v.head(dim()) = log_lengthscales;
        v(dim()) = log_signal_variance;
        return v;
    }

    static KernelHyperparams from_vector(const Eigen::Ref<const Eigen::VectorXd>& v) {
        if (v.size() < 2) throw InputError("kernel parameter vector needs at least 2 entries");
        return {v.head(v.size() - 1), v(v.size() - 1)};
    }

    bool finite() const {
        return log_lengthscales.allFinite() && std::isfinite(log_signal_variance);
    }
};

namespace detail {

inline void check_dim(Eigen::Index got, const KernelHyperparams& hyp, const char* what) {
    if (got != hyp.dim()) {
        throw InputError(std::string(what) + ": input dimension " + std::to_string(got) +
                         " does not match kernel dimension " + std::to_string(hyp.dim()));
    }
}

}  // namespace detail

inline double ardse_eval(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::Ref<const Eigen::VectorXd>& x2,
                         const KernelHyperparams& hyp) {
    detail::check_dim(x.size(), hyp, "ardse_eval");
    detail::check_dim(x2.size(), hyp, "ardse_eval");
    double r2 = 0.0;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
        const double z = (x(d) - x2(d)) * std::exp(-hyp.log_lengthscales(d));
        r2 += z * z;
    }
    return hyp.signal_variance() * std::exp(-0.5 * r2);
}

/// Gram matrix over the rows of X.
inline Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& X, const KernelHyperparams& hyp) {
    detail::check_dim(X.cols(), hyp, "gram");
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd inv_ls = (-hyp.log_lengthscales).array().exp();
    const Eigen::MatrixXd Z = X * inv_ls.asDiagonal();
    const double sf2 = hyp.signal_variance();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        K(j, j) = sf2;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double r2 = (Z.row(i) - Z.row(j)).squaredNorm();
            K(i, j) = sf2 * std::exp(-0.5 * r2);
            K(j, i) = K(i, j);
        }
    }
    return K;
}

/// Cross-covariance vector k_i = k(X_i, xstar).
inline Eigen::VectorXd cross(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& xstar,
                             const KernelHyperparams& hyp) {
    detail::check_dim(X.cols(), hyp, "cross");
    detail::check_dim(xstar.size(), hyp, "cross");
    const Eigen::VectorXd inv_ls = (-hyp.log_lengthscales).array().exp();
    const double sf2 = hyp.signal_variance();
    Eigen::VectorXd k(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double r2 = ((X.row(i).transpose() - xstar).cwiseProduct(inv_ls)).squaredNorm();
        k(i) = sf2 * std::exp(-0.5 * r2);
    }
    return k;
}

/// dK/dtheta_p given an already computed K = gram(X, hyp).
inline Eigen::MatrixXd gram_grad(const Eigen::Ref<const Eigen::MatrixXd>& X, const KernelHyperparams& hyp,
                                 const Eigen::Ref<const Eigen::MatrixXd>& K, Eigen::Index param_index) {
    if (param_index < 0 || param_index >= hyp.num_params()) {
        throw InputError("gram_grad: parameter index " + std::to_string(param_index) + " out of range");
    }
    if (param_index == hyp.dim()) return K;
    const Eigen::Index d = param_index;
    const double inv_l2 = std::exp(-2.0 * hyp.log_lengthscales(d));
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        G(j, j) = 0.0;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double diff = X(i, d) - X(j, d);
            G(i, j) = K(i, j) * diff * diff * inv_l2;
            G(j, i) = G(i, j);
        }
    }
    return G;
}

inline Eigen::MatrixXd gram_grad(const Eigen::Ref<const Eigen::MatrixXd>& X, const KernelHyperparams& hyp,
                                 Eigen::Index param_index) {
    return gram_grad(X, hyp, gram(X, hyp), param_index);
}

/// sum_ij W_ij * dK_ij / dtheta for every kernel parameter, without forming the
/// derivative matrices. W need not be symmetric.
inline Eigen::VectorXd gram_grad_contract(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                          const KernelHyperparams& hyp,
                                          const Eigen::Ref<const Eigen::MatrixXd>& K,
                                          const Eigen::Ref<const Eigen::MatrixXd>& W) {
    const Eigen::Index n = X.rows();
    const Eigen::Index D = hyp.dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(D + 1);
    const Eigen::VectorXd inv_l2 = (-2.0 * hyp.log_lengthscales).array().exp();
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double kw = K(i, j) * W(i, j);
            out(D) += kw;
            if (i == j) continue;
            for (Eigen::Index d = 0; d < D; ++d) {
                const double diff = X(i, d) - X(j, d);
                out(d) += kw * diff * diff * inv_l2(d);
            }
        }
    }
    return out;
}

/// Cholesky factorization with diagonal jitter escalation.
///
/// The matrix is factorized as given first. On failure, jitter starting at
/// 1e-8 * scale is added to the diagonal and escalated x10 up to 1e-4 * scale.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

inline JitteredCholesky jittered_cholesky(const Eigen::Ref<const Eigen::MatrixXd>& A, double scale) {
    if (!A.allFinite()) throw ConditioningError("matrix to factorize has non-finite entries");
    JitteredCholesky out;
    out.llt.compute(A);
    if (out.llt.info() == Eigen::Success) return out;
    const Eigen::Index n = A.rows();
    for (double rel = 1e-8; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
        out.jitter = rel * scale;
        Eigen::MatrixXd B = A;
        B.diagonal().array() += out.jitter;
        out.llt.compute(B);
        if (out.llt.info() == Eigen::Success) return out;
    }
    throw ConditioningError("Cholesky factorization failed after jitter escalation to 1e-4 x scale (n=" +
                            std::to_string(n) + ")");
}

}  // namespace pushgp
