#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushgp/data.hpp"
#include "pushgp/errors.hpp"
#include "pushgp/gp.hpp"
#include "pushgp/metrics.hpp"
#include "pushgp/push_types.hpp"
#include "pushgp/vhgp.hpp"

namespace pushgp {

enum class ModelKind { gp, vhgp };

inline const char* to_string(ModelKind k) { return k == ModelKind::gp ? "gp" : "vhgp"; }

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "gp") return ModelKind::gp;
    if (s == "vhgp") return ModelKind::vhgp;
    throw InputError("unknown model kind '" + s + "' (expected gp or vhgp)");
}

inline const char* to_string(FeatureSet f) { return f == FeatureSet::full ? "full" : "velocity_free"; }

inline FeatureSet feature_set_from_string(const std::string& s) {
    if (s == "full") return FeatureSet::full;
    if (s == "velocity_free") return FeatureSet::velocity_free;
    throw InputError("unknown feature set '" + s + "'");
}

struct PushModelOptions {
    ModelKind kind = ModelKind::vhgp;
    FeatureSet features = FeatureSet::full;
    GPFitOptions gp;      // used for kind == gp
    VHGPFitOptions vhgp;  // used for kind == vhgp
    int threads = 0;      // 0: PUSH_VHGP_THREADS, else hardware concurrency (capped at 3)
};

/// Worker count for per-output fits.
inline int resolve_threads(int requested) {
    int n = requested;
    if (n <= 0) {
        if (const char* env = std::getenv("PUSH_VHGP_THREADS")) n = std::atoi(env);
    }
    if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return std::clamp(n, 1, static_cast<int>(kNumOutputs));
}

inline constexpr std::string_view kModelFormat = "pushgp-model";
inline constexpr int kModelVersion = 1;

/// Three independent single-output regressors (dx, dy, dtheta) over a shared
/// feature set.
class PushModel {
public:
    using Output = std::variant<GPModel, VHGPModel>;

    static PushModel fit(const PushDataset& train, const PushModelOptions& opt = {}) {
        if (train.size() < 2) throw InputError("PushModel::fit: need at least 2 training samples");
        PushModel m;
        m.kind_ = opt.kind;
        m.features_ = opt.features;
        m.n_train_ = train.size();
        m.dt_ = train.dt;
        const Eigen::MatrixXd X = feature_matrix(train, opt.features);
        for (std::size_t k = 0; k < kNumOutputs; ++k) m.train_mean_[k] = output_vector(train, k).mean();

        auto fit_one = [&](std::size_t k) -> Output {
            const Eigen::VectorXd y = output_vector(train, k);
            if (opt.kind == ModelKind::gp) return fit_gp(X, y, opt.gp);
            return fit_vhgp(X, y, opt.vhgp);
        };
        const int threads = resolve_threads(opt.threads);
        if (threads <= 1) {
            for (std::size_t k = 0; k < kNumOutputs; ++k) m.outputs_[k] = fit_one(k);
        } else {
            // Outputs are independent; each fit is deterministic regardless of scheduling.
            std::vector<std::future<Output>> pending;
            std::size_t next = 0;
            while (next < kNumOutputs || !pending.empty()) {
                while (next < kNumOutputs && static_cast<int>(pending.size()) < threads) {
                    pending.push_back(std::async(std::launch::async, fit_one, next++));
                }
                const std::size_t done = next - pending.size();
                m.outputs_[done] = pending.front().get();
                pending.erase(pending.begin());
            }
        }
        return m;
    }

    ModelKind kind() const { return kind_; }
    FeatureSet features() const { return features_; }
    std::size_t n_train() const { return n_train_; }
    double dt() const { return dt_; }
    const std::array<double, kNumOutputs>& train_mean() const { return train_mean_; }
    const Output& output(std::size_t k) const { return outputs_.at(k); }

    PushPrediction predict(const PushInput& in) const {
        const Eigen::VectorXd x = features_of(in, features_);
        PushPrediction p;
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            p[k] = std::visit(
                [&](const auto& mdl) {
                    const auto r = mdl.predict(x);
                    return OutputPrediction{r.mean, r.total_variance};
                },
                outputs_[k]);
        }
        return p;
    }

    std::vector<PushPrediction> predict(const PushDataset& ds) const {
        std::vector<PushPrediction> out;
        out.reserve(ds.size());
        for (const PushSample& s : ds.samples) out.push_back(predict(s.input));
        return out;
    }

    /// Per-output training objective: negative log marginal likelihood for a
    /// GP, the variational lower bound for a VHGP.
    std::array<double, kNumOutputs> objectives() const {
        std::array<double, kNumOutputs> o{};
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            if (const auto* g = std::get_if<GPModel>(&outputs_[k])) o[k] = g->objective();
            else o[k] = std::get<VHGPModel>(outputs_[k]).bound();
        }
        return o;
    }

    EvalReport evaluate(const PushDataset& test) const {
        return pushgp::evaluate(predict(test), test, train_mean_, true);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = kModelFormat;
        j["version"] = kModelVersion;
        j["model"] = to_string(kind_);
        j["features"] = to_string(features_);
        j["n_train"] = n_train_;
        j["dt_s"] = dt_;
        j["train_mean"] = train_mean_;
        nlohmann::json outs = nlohmann::json::array();
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            nlohmann::json o;
            o["name"] = kOutputNames[k];
            std::visit([&](const auto& mdl) { write_common(o, mdl.training_inputs(), mdl.training_targets(),
                                                           mdl.standardizer()); },
                       outputs_[k]);
            if (const auto* g = std::get_if<GPModel>(&outputs_[k])) {
                o["kernel"] = to_array(g->kernel().to_vector());
                o["noise_variance"] = g->noise_variance();
                o["objective"] = g->objective();
            } else {
                const auto& v = std::get<VHGPModel>(outputs_[k]);
                o["params"] = to_array(v.params());
                o["bound"] = v.bound();
            }
            outs.push_back(std::move(o));
        }
        j["outputs"] = std::move(outs);
        return j;
    }

    static PushModel from_json(const nlohmann::json& j) {
        if (!j.is_object() || j.value("format", "") != kModelFormat) throw FormatError("not a pushgp model artifact");
        if (j.value("version", -1) != kModelVersion) throw FormatError("unsupported model artifact version");
        try {
            PushModel m;
            m.kind_ = model_kind_from_string(j.at("model").get<std::string>());
            m.features_ = feature_set_from_string(j.at("features").get<std::string>());
            m.n_train_ = j.at("n_train").get<std::size_t>();
            m.dt_ = j.at("dt_s").get<double>();
            m.train_mean_ = j.at("train_mean").get<std::array<double, kNumOutputs>>();
            const auto& outs = j.at("outputs");
            if (!outs.is_array() || outs.size() != kNumOutputs) throw FormatError("artifact must hold three outputs");
            for (std::size_t k = 0; k < kNumOutputs; ++k) {
                const auto& o = outs[k];
                const Eigen::MatrixXd X = mat(o.at("X"));
                const Eigen::VectorXd y = vec(o.at("y"));
                Standardizer st;
                st.input_mean = vec(o.at("input_mean"));
                st.input_scale = vec(o.at("input_scale"));
                st.target_mean = o.at("target_mean").get<double>();
                st.target_scale = o.at("target_scale").get<double>();
                if (m.kind_ == ModelKind::gp) {
                    GPModel g = GPModel::condition(X, y, KernelHyperparams::from_vector(vec(o.at("kernel"))),
                                                   o.at("noise_variance").get<double>(), st);
                    g.set_objective(o.at("objective").get<double>());
                    m.outputs_[k] = std::move(g);
                } else {
                    m.outputs_[k] = VHGPModel::condition(X, y, vec(o.at("params")), st);
                }
            }
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("malformed model artifact: ") + e.what());
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream os(path);
        if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
        os << to_json().dump() << '\n';
        if (!os) throw InputError("failed writing '" + path.string() + "'");
    }

    static PushModel load(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw InputError("cannot open '" + path.string() + "'");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(std::string("invalid JSON in model artifact: ") + e.what());
        }
        return from_json(j);
    }

private:
    static nlohmann::json to_array(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

    static Eigen::VectorXd vec(const nlohmann::json& j) {
        const auto v = j.get<std::vector<double>>();
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    static Eigen::MatrixXd mat(const nlohmann::json& j) {
        const auto rows = j.get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw FormatError("artifact holds no training inputs");
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) throw FormatError("ragged training input matrix");
            for (std::size_t d = 0; d < rows[i].size(); ++d)
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = rows[i][d];
        }
        return X;
    }

    static void write_common(nlohmann::json& o, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Standardizer& st) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < X.rows(); ++i) rows.push_back(to_array(X.row(i).transpose()));
        o["X"] = std::move(rows);
        o["y"] = to_array(y);
        o["input_mean"] = to_array(st.input_mean);
        o["input_scale"] = to_array(st.input_scale);
        o["target_mean"] = st.target_mean;
        o["target_scale"] = st.target_scale;
    }

    ModelKind kind_ = ModelKind::vhgp;
    FeatureSet features_ = FeatureSet::full;
    std::size_t n_train_ = 0;
    double dt_ = 0.2;
    std::array<double, kNumOutputs> train_mean_{};
    std::array<Output, kNumOutputs> outputs_;
};

}  // namespace pushgp
