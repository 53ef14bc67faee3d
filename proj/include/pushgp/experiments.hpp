#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pushgp/data.hpp"
#include "pushgp/metrics.hpp"
#include "pushgp/model_set.hpp"
#include "pushgp/pushmodel.hpp"

namespace pushgp {

// ---------------------------------------------------------------------------
// Analytical baseline
// ---------------------------------------------------------------------------

/// The analytical model with its own (possibly wrong) object parameters.
struct AnalyticalBaseline {
    ObjectParams params;

    PushOutcome predict(const PushInput& in, double dt) const { return analytical_push(in, params, dt).outcome; }

    /// Deterministic predictions with unit variance placeholders; only NMSE
    /// is meaningful for them.
    std::vector<PushPrediction> predict(const PushDataset& ds) const {
        std::vector<PushPrediction> out;
        out.reserve(ds.size());
        for (const PushSample& s : ds.samples) {
            const PushOutcome o = predict(s.input, s.dt);
            out.push_back({{{o.dx, 1.0}, {o.dy, 1.0}, {o.dtheta, 1.0}}});
        }
        return out;
    }

    EvalReport evaluate(const PushDataset& test, const std::array<double, kNumOutputs>& train_mean) const {
        return pushgp::evaluate(predict(test), test, train_mean, false);
    }
};

/// Baseline parameters that deliberately differ from the generator: a limit
/// surface ratio scaled by `ls_scale` and a friction coefficient of `mu`.
inline ObjectParams miscalibrated(const ObjectParams& truth, double ls_scale = 0.5, double mu = 0.6) {
    ObjectParams p = truth;
    p.ls_ratio_c = truth.ls_ratio_c * ls_scale;
    p.mu_contact = mu;
    return p;
}

inline std::array<double, kNumOutputs> output_means(const PushDataset& ds) {
    if (ds.empty()) throw InputError("output_means: empty dataset");
    std::array<double, kNumOutputs> m{};
    for (std::size_t k = 0; k < kNumOutputs; ++k) m[k] = output_vector(ds, k).mean();
    return m;
}

// ---------------------------------------------------------------------------
// Learning curves
// ---------------------------------------------------------------------------

struct LearningCurveOptions {
    std::vector<std::string> models{"analytical", "gp", "vhgp"};
    std::vector<std::size_t> sizes{50, 100, 200, 400, 800};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t n_test = 0;  // 0: everything not needed for the largest size
    PushModelOptions gp{.kind = ModelKind::gp};
    PushModelOptions vhgp{.kind = ModelKind::vhgp};
    ObjectParams baseline = miscalibrated(ObjectParams{});
};

struct LearningCurveRow {
    std::string model;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
    EvalReport report;
};

/// For each seed the dataset is shuffled once into a fixed test set and a
/// training pool; each size trains on a prefix of the pool, so larger
/// training sets contain the smaller ones.
inline std::vector<LearningCurveRow> learning_curve(
    const PushDataset& ds, const LearningCurveOptions& opt,
    const std::function<void(const LearningCurveRow&)>& on_row = {}) {
    if (opt.sizes.empty() || opt.seeds.empty() || opt.models.empty()) {
        throw InputError("learning_curve: sizes, seeds and models must be non-empty");
    }
    const std::size_t max_size = *std::max_element(opt.sizes.begin(), opt.sizes.end());
    if (max_size >= ds.size()) throw InputError("learning_curve: largest size must be smaller than the dataset");
    const std::size_t n_test = opt.n_test > 0 ? opt.n_test : ds.size() - max_size;
    if (n_test + max_size > ds.size()) throw InputError("learning_curve: n_test too large for the dataset");
    for (const std::string& m : opt.models) {
        if (m != "analytical" && m != "gp" && m != "vhgp") throw InputError("learning_curve: unknown model '" + m + "'");
    }
    const AnalyticalBaseline baseline{opt.baseline};

    std::vector<LearningCurveRow> rows;
    for (std::uint64_t seed : opt.seeds) {
        auto [pool, test] = split(ds, ds.size() - n_test, seed);
        for (std::size_t n : opt.sizes) {
            PushDataset train;
            train.dt = pool.dt;
            train.samples.assign(pool.samples.begin(), pool.samples.begin() + static_cast<std::ptrdiff_t>(n));
            const auto mean = output_means(train);
            for (const std::string& m : opt.models) {
                LearningCurveRow row{m, n, seed, {}};
                if (m == "analytical") {
                    row.report = baseline.evaluate(test, mean);
                } else {
                    PushModelOptions mo = m == "gp" ? opt.gp : opt.vhgp;
                    mo.kind = m == "gp" ? ModelKind::gp : ModelKind::vhgp;
                    row.report = PushModel::fit(train, mo).evaluate(test);
                }
                if (on_row) on_row(row);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

/// Median NMSE over seeds for one model and training size.
inline double median_nmse(const std::vector<LearningCurveRow>& rows, const std::string& model, std::size_t n) {
    std::vector<double> v;
    for (const auto& r : rows)
        if (r.model == model && r.n_train == n) v.push_back(r.report.nmse_total);
    return median(v);
}

// ---------------------------------------------------------------------------
// Grid predictions
// ---------------------------------------------------------------------------

struct GridSpec {
    std::vector<double> c_values = linspace_step(0.0, 1.0, 0.05);
    std::vector<double> beta_values = linspace_step(-1.5, 1.5, 0.1);
    double v_p = 20.0;
    double dt = 0.2;

    void validate() const {
        if (c_values.empty() || beta_values.empty()) throw InputError("grid: value lists must be non-empty");
        for (double c : c_values)
            if (!(c >= 0.0 && c <= 1.0)) throw InputError("grid: c values must lie in [0, 1]");
        for (double b : beta_values)
            if (!(std::abs(b) <= 0.5 * std::numbers::pi)) throw InputError("grid: |beta| must be <= pi/2");
        if (!(v_p >= 0.0)) throw InputError("grid: v_p must be >= 0");
        if (!(dt > 0.0)) throw InputError("grid: dt must be > 0");
    }
};

struct GridRow {
    double c = 0.0;
    double beta = 0.0;
    PushPrediction prediction;
};

/// Row order: c outer, beta inner.
inline std::vector<GridRow> grid_predict(const PushModel& model, const GridSpec& spec) {
    spec.validate();
    std::vector<GridRow> rows;
    rows.reserve(spec.c_values.size() * spec.beta_values.size());
    for (double c : spec.c_values)
        for (double b : spec.beta_values) rows.push_back({c, b, model.predict(PushInput{spec.v_p, c, b})});
    return rows;
}

/// Relative mirror asymmetry of the grid means for dy and dtheta:
/// sum |m(c, b) + m(1 - c, -b)| / sum (|m(c, b)| + |m(1 - c, -b)|), over the
/// grid points whose mirror image is also on the grid. 0 is perfectly
/// antisymmetric.
inline std::array<double, 2> mirror_asymmetry(const std::vector<GridRow>& rows) {
    std::map<std::pair<long long, long long>, const GridRow*> index;
    auto key = [](double c, double b) { return std::make_pair(std::llround(c * 1e6), std::llround(b * 1e6)); };
    for (const GridRow& r : rows) index[key(r.c, r.beta)] = &r;
    std::array<double, 2> num{0.0, 0.0}, den{0.0, 0.0};
    for (const GridRow& r : rows) {
        const auto it = index.find(key(1.0 - r.c, -r.beta));
        if (it == index.end()) continue;
        for (std::size_t k = 1; k < kNumOutputs; ++k) {
            const double a = r.prediction[k].mean, b = it->second->prediction[k].mean;
            num[k - 1] += std::abs(a + b);
            den[k - 1] += std::abs(a) + std::abs(b);
        }
    }
    return {den[0] > 0.0 ? num[0] / den[0] : 0.0, den[1] > 0.0 ? num[1] / den[1] : 0.0};
}

// ---------------------------------------------------------------------------
// KL validation against repeated pushes
// ---------------------------------------------------------------------------

struct KLGroupRow {
    RepeatedPushGroup group;
    PushPrediction prediction;
    KLPushResult kl;
    bool excluded = false;  // std undefined (single repetition)
};

struct KLValidation {
    std::vector<KLGroupRow> rows;
    KLSummary summary;
};

inline KLValidation validate_kl(const PushModel& model, const std::vector<RepeatedPushGroup>& groups,
                                const KLFloor& floor = {}) {
    KLValidation out;
    std::vector<double> totals;
    std::array<std::vector<double>, kNumOutputs> per;
    for (const RepeatedPushGroup& g : groups) {
        KLGroupRow row;
        row.group = g;
        row.prediction = model.predict(g.input);
        if (!g.std_defined()) {
            row.excluded = true;
            ++out.summary.n_excluded;
        } else {
            row.kl = kl_push(row.prediction, g, floor);
            totals.push_back(row.kl.total);
            for (std::size_t k = 0; k < kNumOutputs; ++k) per[k].push_back(row.kl.per_output[k]);
            if (row.kl.any_floored()) ++out.summary.n_floored;
        }
        out.rows.push_back(row);
    }
    if (totals.empty()) throw InputError("validate_kl: no group has at least two repetitions");
    out.summary.n_groups = totals.size();
    out.summary.average = mean(totals);
    out.summary.median = median(totals);
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        out.summary.average_per_output[k] = mean(per[k]);
        out.summary.median_per_output[k] = median(per[k]);
    }
    return out;
}

/// Draws `repetitions` outcomes per input from the model's own predictive
/// distributions (independent Gaussians per output).
inline PushDataset sample_from_model(const PushModel& model, const std::vector<PushInput>& inputs, int repetitions,
                                     std::uint64_t seed) {
    if (repetitions < 1) throw InputError("sample_from_model: repetitions must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    PushDataset ds;
    ds.dt = model.dt();
    ds.provenance = "sampled from model predictive distribution, seed " + std::to_string(seed);
    for (const PushInput& in : inputs) {
        const PushPrediction p = model.predict(in);
        for (int r = 0; r < repetitions; ++r) {
            PushSample s;
            s.input = in;
            s.dt = model.dt();
            s.rep_id = r;
            s.source = SampleSource::synthetic;
            for (std::size_t k = 0; k < kNumOutputs; ++k) s.outcome[k] = p[k].mean + std::sqrt(p[k].variance) * gauss(rng);
            ds.samples.push_back(s);
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Quasi-static regime study
// ---------------------------------------------------------------------------

/// Maps each window at speed v to the reference speed: duration dt * v / v_ref,
/// displacements unchanged.
inline PushDataset time_scale(const PushDataset& ds, double v_ref) {
    if (!(v_ref > 0.0)) throw InputError("time_scale: v_ref must be > 0");
    PushDataset out = ds;
    for (PushSample& s : out.samples) {
        s.dt = s.dt * s.input.v_p / v_ref;
        s.input.v_p = v_ref;
    }
    if (!out.empty()) out.dt = out.samples.front().dt;
    return out;
}

struct QuasistaticOptions {
    std::vector<double> brackets;  // maximum speeds included, ascending
    double v_ref = 10.0;
    double test_fraction = 0.3;
    std::uint64_t seed = 0;
    PushModelOptions model{.kind = ModelKind::gp, .features = FeatureSet::velocity_free};
};

struct QuasistaticRow {
    double max_speed = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    EvalReport report;
};

/// For each bracket: keep samples with v_p <= max speed, time-scale them to
/// v_ref, hold out a random test fraction, train a velocity-free model on the
/// rest and score NMSE on the held-out part.
inline std::vector<QuasistaticRow> quasistatic(const PushDataset& ds, const QuasistaticOptions& opt,
                                               const std::function<void(const QuasistaticRow&)>& on_row = {}) {
    if (opt.brackets.empty()) throw InputError("quasistatic: no speed brackets given");
    if (!(opt.test_fraction > 0.0 && opt.test_fraction < 1.0)) {
        throw InputError("quasistatic: test_fraction must lie in (0, 1)");
    }
    PushModelOptions mo = opt.model;
    mo.features = FeatureSet::velocity_free;
    std::vector<QuasistaticRow> rows;
    for (double vmax : opt.brackets) {
        const PushDataset slice =
            time_scale(filter(ds, [&](const PushSample& s) { return s.input.v_p <= vmax + 1e-9; }), opt.v_ref);
        const auto n_test = static_cast<std::size_t>(std::llround(opt.test_fraction * static_cast<double>(slice.size())));
        if (slice.size() < 4 || n_test < 1 || slice.size() - n_test < 2) {
            throw InputError("quasistatic: bracket up to " + std::to_string(vmax) + " mm/s has too few samples");
        }
        auto [train, test] = split(slice, slice.size() - n_test, opt.seed);
        QuasistaticRow row;
        row.max_speed = vmax;
        row.n_train = train.size();
        row.n_test = test.size();
        row.report = PushModel::fit(train, mo).evaluate(test);
        if (on_row) on_row(row);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace pushgp
