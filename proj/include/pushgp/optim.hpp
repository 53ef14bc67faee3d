#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pushgp/errors.hpp"

namespace pushgp {

struct OptimConfig {
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;   // infinity norm
    double objective_tolerance = 1e-9;  // relative change between accepted iterates
    int num_restarts = 1;
    std::uint64_t seed = 0;
    int memory = 10;                    // L-BFGS history length
    double restart_perturbation = 0.5;  // std of log-space perturbation for restarts

    void validate() const {
        if (max_iterations < 1) throw InputError("max_iterations must be >= 1");
        if (!(gradient_tolerance > 0.0)) throw InputError("gradient_tolerance must be > 0");
        if (!(objective_tolerance > 0.0)) throw InputError("objective_tolerance must be > 0");
        if (num_restarts < 1) throw InputError("num_restarts must be >= 1");
        if (memory < 1) throw InputError("memory must be >= 1");
    }
};

/// Objective callback: returns the value and writes the gradient into `grad`
/// (already sized to x.size()).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

enum class StopReason { gradient_tolerance, objective_tolerance, max_iterations, line_search_failed };

inline std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::gradient_tolerance: return "gradient_tolerance";
        case StopReason::objective_tolerance: return "objective_tolerance";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

struct OptimResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    std::vector<double> trace;  // objective at x0 and at every accepted iterate
    int iterations = 0;
    StopReason reason = StopReason::max_iterations;
    bool warning = false;  // non-finite values were hit and could not be recovered from
    int restart_index = 0;
};

namespace detail {

// Evaluates the objective, mapping numerical exceptions and non-finite output to +inf.
inline double safe_eval(const Objective& fn, const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.setZero(x.size());
    double f;
    try {
        f = fn(x, g);
    } catch (const ConditioningError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(f) || !g.allFinite()) return std::numeric_limits<double>::infinity();
    return f;
}

}  // namespace detail

/// Limited-memory quasi-Newton minimization with a backtracking line search
/// enforcing the Armijo sufficient-decrease condition.
inline OptimResult minimize(const Objective& fn, const Eigen::VectorXd& x0, const OptimConfig& config) {
    config.validate();
    constexpr double kArmijo = 1e-4;
    constexpr double kMinStep = 1e-20;
    const Eigen::Index n = x0.size();

    OptimResult res;
    res.x = x0;
    Eigen::VectorXd g(n);
    res.f = fn(res.x, g);
    if (!std::isfinite(res.f) || !g.allFinite()) {
        throw InputError("objective is not finite at the starting point");
    }
    res.trace.push_back(res.f);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    Eigen::VectorXd x_new(n), g_new(n), d(n);

    for (res.iterations = 0; res.iterations < config.max_iterations;) {
        if (g.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
            res.reason = StopReason::gradient_tolerance;
            return res;
        }

        // Two-loop recursion.
        d = -g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(d);
            d -= alpha[i] * y_hist[i];
        }
        double step0 = 1.0;
        if (!s_hist.empty()) {
            d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        } else {
            step0 = std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(d);
            d += (alpha[i] - beta) * s_hist[i];
        }

        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            // Not a descent direction: drop the curvature history.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            d = -g;
            slope = -g.squaredNorm();
            step0 = std::min(1.0, 1.0 / g.lpNorm<Eigen::Infinity>());
        }

        double step = step0;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        bool hit_nonfinite = false;
        while (step > kMinStep) {
            x_new = res.x + step * d;
            f_new = detail::safe_eval(fn, x_new, g_new);
            if (!std::isfinite(f_new)) {
                hit_nonfinite = true;
                step *= 0.5;
                continue;
            }
            if (f_new <= res.f + kArmijo * step * slope) {
                accepted = true;
                break;
            }
            // Safeguarded quadratic interpolation of the step.
            const double denom = 2.0 * (f_new - res.f - slope * step);
            double trial = denom > 0.0 ? -slope * step * step / denom : 0.5 * step;
            step = std::clamp(trial, 0.1 * step, 0.5 * step);
        }

        if (!accepted) {
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;  // retry from steepest descent
            }
            res.reason = StopReason::line_search_failed;
            res.warning = hit_nonfinite;
            return res;
        }

        const Eigen::VectorXd s = x_new - res.x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(s);
            y_hist.push_back(y);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > config.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        const double f_old = res.f;
        res.x = x_new;
        res.f = f_new;
        g = g_new;
        res.trace.push_back(res.f);
        ++res.iterations;

        const double rel = std::abs(f_old - res.f) / std::max({std::abs(f_old), std::abs(res.f), 1.0});
        if (rel < config.objective_tolerance) {
            res.reason = g.lpNorm<Eigen::Infinity>() < config.gradient_tolerance ? StopReason::gradient_tolerance
                                                                                  : StopReason::objective_tolerance;
            return res;
        }
    }
    res.reason = StopReason::max_iterations;
    return res;
}

/// Runs `minimize` from x0 and from num_restarts - 1 perturbed copies of x0,
/// returning the best result. Restart r (r >= 1) perturbs the coordinates
/// selected by `perturb_mask` (all when empty) with N(0, restart_perturbation^2)
/// noise drawn from a generator seeded by (seed, r).
inline OptimResult minimize_with_restarts(const Objective& fn, const Eigen::VectorXd& x0, const OptimConfig& config,
                                          const std::vector<bool>& perturb_mask = {}) {
    config.validate();
    if (!perturb_mask.empty() && static_cast<Eigen::Index>(perturb_mask.size()) != x0.size()) {
        throw InputError("perturb_mask size does not match parameter vector");
    }
    OptimResult best = minimize(fn, x0, config);
    for (int r = 1; r < config.num_restarts; ++r) {
        std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                          static_cast<std::uint32_t>(config.seed >> 32), static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, config.restart_perturbation);
        Eigen::VectorXd start = x0;
        for (Eigen::Index i = 0; i < start.size(); ++i) {
            if (perturb_mask.empty() || perturb_mask[static_cast<std::size_t>(i)]) start(i) += noise(rng);
        }
        Eigen::VectorXd g(start.size());
        if (!std::isfinite(detail::safe_eval(fn, start, g))) continue;
        OptimResult cand = minimize(fn, start, config);
        cand.restart_index = r;
        if (cand.f < best.f) best = std::move(cand);
    }
    return best;
}

/// Maximum over coordinates of |g_analytic - g_fd| / max(1, |g_fd|) using
/// central differences with step h.
inline double grad_check(const Objective& fn, const Eigen::VectorXd& x, double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    const double f0 = fn(x, g);
    if (!std::isfinite(f0) || !g.allFinite()) throw NumericalError("grad_check: objective not finite at x");
    Eigen::VectorXd scratch(x.size());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        scratch.setZero();
        const double fp = fn(xp, scratch);
        scratch.setZero();
        const double fm = fn(xm, scratch);
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericalError("grad_check: objective not finite near coordinate " + std::to_string(i));
        }
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, std::abs(g(i) - fd) / std::max(1.0, std::abs(fd)));
    }
    return worst;
}

}  // namespace pushgp
