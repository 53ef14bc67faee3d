#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "pushgp/errors.hpp"

namespace pushgp {

/// Affine transform to zero-mean / unit-scale inputs and targets, fixed at fit
/// time. Constant columns (or constant targets) keep a unit scale.
struct Standardizer {
    Eigen::VectorXd input_mean;
    Eigen::VectorXd input_scale;
    double target_mean = 0.0;
    double target_scale = 1.0;

    static Standardizer identity(Eigen::Index dim) {
        return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim), 0.0, 1.0};
    }

    static Standardizer fit(const Eigen::Ref<const Eigen::MatrixXd>& X, const Eigen::Ref<const Eigen::VectorXd>& y) {
        if (X.rows() != y.size()) throw InputError("Standardizer::fit: X rows and y size differ");
        if (X.rows() == 0) throw InputError("Standardizer::fit: empty data");
        Standardizer s;
        const double n = static_cast<double>(X.rows());
        s.input_mean = X.colwise().mean().transpose();
        s.input_scale.resize(X.cols());
        for (Eigen::Index d = 0; d < X.cols(); ++d) {
            const double var = (X.col(d).array() - s.input_mean(d)).square().sum() / n;
            s.input_scale(d) = var > 0.0 ? std::sqrt(var) : 1.0;
        }
        s.target_mean = y.mean();
        const double var = (y.array() - s.target_mean).square().sum() / n;
        s.target_scale = var > 0.0 ? std::sqrt(var) : 1.0;
        return s;
    }

    Eigen::Index dim() const { return input_mean.size(); }

    Eigen::MatrixXd transform_inputs(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
        if (X.cols() != dim()) throw InputError("Standardizer: input dimension mismatch");
        return (X.rowwise() - input_mean.transpose()).array().rowwise() / input_scale.transpose().array();
    }

    Eigen::VectorXd transform_input(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != dim()) throw InputError("Standardizer: input dimension mismatch");
        return (x - input_mean).cwiseQuotient(input_scale);
    }

    Eigen::VectorXd transform_targets(const Eigen::Ref<const Eigen::VectorXd>& y) const {
        return (y.array() - target_mean) / target_scale;
    }

    double target_to_original(double z) const { return z * target_scale + target_mean; }
    double variance_to_original(double v) const { return v * target_scale * target_scale; }
};

}  // namespace pushgp
