#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pushgp/data.hpp"
#include "pushgp/errors.hpp"
#include "pushgp/push_types.hpp"

namespace pushgp {

/// Normalized mean squared error against the training-set mean `train_mean`.
inline double nmse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& observations, double train_mean) {
    if (predictions.size() != observations.size()) throw InputError("nmse: size mismatch");
    if (observations.size() == 0) throw InputError("nmse: empty input");
    const double num = (observations - predictions).squaredNorm();
    const double den = (observations.array() - train_mean).square().sum();
    if (!(den > 0.0)) throw InputError("nmse: undefined for observations all equal to the reference mean");
    return num / den;
}

inline double gaussian_log_density(double y, double mean, double variance) {
    if (!(variance > 0.0)) throw InputError("gaussian_log_density: variance must be > 0");
    const double r = y - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

/// Negative mean of per-sample joint log densities.
inline double nlpd(const Eigen::VectorXd& log_densities) {
    if (log_densities.size() == 0) throw InputError("nlpd: empty input");
    for (Eigen::Index i = 0; i < log_densities.size(); ++i) {
        if (!std::isfinite(log_densities(i))) {
            throw NumericalError("nlpd: non-finite log density at sample " + std::to_string(i));
        }
    }
    return -log_densities.mean();
}

/// KL(p || q) for univariate Gaussians given by mean and variance.
inline double kl_gauss(double mu1, double var1, double mu2, double var2) {
    if (!(var1 > 0.0) || !(var2 > 0.0)) throw InputError("kl_gauss: variances must be > 0");
    const double d = mu1 - mu2;
    const double kl = 0.5 * (std::log(var2 / var1) + (var1 + d * d) / var2 - 1.0);
    return std::max(kl, 0.0);
}

struct OutputPrediction {
    double mean = 0.0;
    double variance = 1.0;  // total predictive variance
};

using PushPrediction = std::array<OutputPrediction, kNumOutputs>;

/// Sensor-resolution floor applied to empirical standard deviations.
struct KLFloor {
    double displacement_std = 0.05;  // [mm], dx and dy
    double rotation_std = 0.002;     // [rad], dtheta

    double variance(std::size_t k) const {
        const double s = k == 2 ? rotation_std : displacement_std;
        return s * s;
    }
};

struct KLPushResult {
    double total = 0.0;
    std::array<double, kNumOutputs> per_output{0.0, 0.0, 0.0};
    std::array<bool, kNumOutputs> floored{false, false, false};
    bool any_floored() const { return floored[0] || floored[1] || floored[2]; }
};

/// Sum over the three outputs of KL(empirical || predicted).
inline KLPushResult kl_push(const PushPrediction& predicted, const RepeatedPushGroup& empirical,
                            const KLFloor& floor = {}) {
    if (!empirical.std_defined()) throw InputError("kl_push: empirical std undefined (fewer than 2 repetitions)");
    KLPushResult r;
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        double var = empirical.empirical_std[k] * empirical.empirical_std[k];
        if (var < floor.variance(k)) {
            var = floor.variance(k);
            r.floored[k] = true;
        }
        r.per_output[k] = kl_gauss(empirical.empirical_mean[k], var, predicted[k].mean, predicted[k].variance);
        r.total += r.per_output[k];
    }
    return r;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
    const double hi = v[m];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
    return 0.5 * (lo + hi);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

struct EvalReport {
    std::array<double, kNumOutputs> nmse_per_output{0.0, 0.0, 0.0};
    double nmse_total = 0.0;
    // NaN for deterministic predictors, which have no predictive density.
    double nlpd_total = std::numeric_limits<double>::quiet_NaN();
    std::array<double, kNumOutputs> nlpd_per_output{};
    std::size_t n_test = 0;
};

/// Scores predictions on a test set. `train_mean` holds the per-output
/// training-set means. When `probabilistic` is false only NMSE is reported.
inline EvalReport evaluate(const std::vector<PushPrediction>& predictions, const PushDataset& test,
                           const std::array<double, kNumOutputs>& train_mean, bool probabilistic = true) {
    if (test.empty()) throw InputError("evaluate: empty test set");
    if (predictions.size() != test.size()) throw InputError("evaluate: prediction count mismatch");
    const Eigen::Index m = static_cast<Eigen::Index>(test.size());
    EvalReport rep;
    rep.n_test = test.size();
    Eigen::VectorXd joint = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        Eigen::VectorXd pred(m), obs(m), ld(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& p = predictions[static_cast<std::size_t>(i)][k];
            pred(i) = p.mean;
            obs(i) = test.samples[static_cast<std::size_t>(i)].outcome[k];
            if (probabilistic) ld(i) = gaussian_log_density(obs(i), p.mean, p.variance);
        }
        rep.nmse_per_output[k] = nmse(pred, obs, train_mean[k]);
        rep.nmse_total += rep.nmse_per_output[k];
        if (probabilistic) {
            rep.nlpd_per_output[k] = nlpd(ld);
            joint += ld;
        }
    }
    if (probabilistic) rep.nlpd_total = nlpd(joint);
    return rep;
}

struct KLSummary {
    double average = 0.0;  // of the per-push sums
    double median = 0.0;
    std::array<double, kNumOutputs> average_per_output{};
    std::array<double, kNumOutputs> median_per_output{};
    std::size_t n_groups = 0;
    std::size_t n_excluded = 0;  // groups without a defined std
    std::size_t n_floored = 0;   // groups where a variance floor applied
};

}  // namespace pushgp
