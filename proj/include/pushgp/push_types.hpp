#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pushgp {

inline constexpr std::size_t kNumOutputs = 3;
inline constexpr std::array<const char*, kNumOutputs> kOutputNames{"dx", "dy", "dtheta"};

/// Push action u = (v_p, c, beta).
///   v_p  pusher speed [mm/s]
///   c    contact coordinate in [0, 1] along the pushed edge (perimeter fraction
///        for round shapes)
///   beta push angle from the inward edge normal [rad], positive rotates the
///        push direction counterclockwise
struct PushInput {
    double v_p = 0.0;
    double c = 0.5;
    double beta = 0.0;

    Eigen::Vector3d as_vector() const { return {v_p, c, beta}; }
    bool operator==(const PushInput&) const = default;
};

/// Object displacement over one window, in the frame whose x axis is the push
/// direction: dx, dy [mm] and rotation dtheta [rad].
struct PushOutcome {
    double dx = 0.0;
    double dy = 0.0;
    double dtheta = 0.0;

    double operator[](std::size_t k) const { return k == 0 ? dx : (k == 1 ? dy : dtheta); }
    double& operator[](std::size_t k) { return k == 0 ? dx : (k == 1 ? dy : dtheta); }
    bool finite() const { return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dtheta); }
    bool operator==(const PushOutcome&) const = default;
};

enum class SampleSource { real, synthetic };

inline const char* to_string(SampleSource s) { return s == SampleSource::real ? "real" : "synthetic"; }

struct PushSample {
    PushInput input;
    PushOutcome outcome;
    double dt = 0.2;  // window duration [s]
    std::string object = "square";
    std::string surface = "default";
    std::optional<int> rep_id;
    SampleSource source = SampleSource::synthetic;
};

struct PushDataset {
    std::vector<PushSample> samples;
    double dt = 0.2;
    std::string provenance;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Which inputs a learned model sees.
enum class FeatureSet { full, velocity_free };

inline Eigen::VectorXd features_of(const PushInput& in, FeatureSet fs) {
    if (fs == FeatureSet::full) return Eigen::Vector3d(in.v_p, in.c, in.beta);
    return Eigen::Vector2d(in.c, in.beta);
}

inline Eigen::MatrixXd feature_matrix(const PushDataset& ds, FeatureSet fs) {
    const Eigen::Index d = fs == FeatureSet::full ? 3 : 2;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(ds.size()), d);
    for (std::size_t i = 0; i < ds.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = features_of(ds.samples[i].input, fs);
    return X;
}

inline Eigen::VectorXd output_vector(const PushDataset& ds, std::size_t k) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) y(static_cast<Eigen::Index>(i)) = ds.samples[i].outcome[k];
    return y;
}

}  // namespace pushgp
