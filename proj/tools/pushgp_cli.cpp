#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "json_config.hpp"
#include "pushgp/pushgp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using pushgp::detail::format_double;

namespace pushgp::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Command-line knobs shared by every subcommand that fits models.
struct ModelArgs {
    std::string model = "vhgp";
    int gp_restarts = 3;
    int gp_max_iter = 500;
    int vhgp_restarts = 1;
    int vhgp_max_iter = 200;
    int threads = 0;
    std::uint64_t seed = 0;

    void add(CLI::App* sub, bool with_kind) {
        if (with_kind) sub->add_option("--model", model, "Model family")->check(CLI::IsMember({"gp", "vhgp"}));
        sub->add_option("--gp-restarts", gp_restarts, "Optimizer restarts for GP fits")->check(CLI::PositiveNumber);
        sub->add_option("--gp-max-iter", gp_max_iter, "Iteration cap for GP fits")->check(CLI::PositiveNumber);
        sub->add_option("--vhgp-restarts", vhgp_restarts, "Optimizer restarts for VHGP fits")
            ->check(CLI::PositiveNumber);
        sub->add_option("--vhgp-max-iter", vhgp_max_iter, "Iteration cap for VHGP fits")->check(CLI::PositiveNumber);
        sub->add_option("--threads", threads, "Concurrent per-output fits (0: PUSH_VHGP_THREADS or cores)");
        sub->add_option("--seed", seed, "Seed for optimizer restarts and data splits");
    }

    PushModelOptions options(ModelKind kind) const {
        PushModelOptions o;
        o.kind = kind;
        o.gp.optim.num_restarts = gp_restarts;
        o.gp.optim.max_iterations = gp_max_iter;
        o.gp.optim.seed = seed;
        o.vhgp.gp = o.gp;
        o.vhgp.optim.num_restarts = vhgp_restarts;
        o.vhgp.optim.max_iterations = vhgp_max_iter;
        o.vhgp.optim.seed = seed;
        o.threads = threads;
        return o;
    }
};

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw InputError("cannot open '" + p.string() + "' for writing");
    return os;
}

/// Writes `<out>.meta.json` holding the subcommand, its full option set
/// (reusable through --config) and any result summary.
void write_sidecar(const fs::path& out, const CLI::App* sub, const json& extra = json::object()) {
    json j;
    j["command"] = sub->get_name();
    j["config"] = JsonConfig::options_json(sub);
    for (const auto& [k, v] : extra.items()) j[k] = v;
    std::ofstream os = open_out(fs::path(out.string() + ".meta.json"));
    os << j.dump(2) << '\n';
}

std::string csv(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string shape = "square";
    double size = 90.0;      // side or radius
    double size_b = 45.0;    // ellipse semi-axis along y
    double mu = 0.25;
    double ls_ratio = 0.0;   // 0: uniform-pressure default
    std::string sampling = "random";
    std::size_t n = 1000;
    double v_min = 20.0, v_max = 20.0;
    std::vector<double> v_values;
    double c_step = 0.05, beta_step = 0.1;
    std::vector<double> grid_v{20.0};
    int reps = 1;
    bool equal_length = false;
    double v_ref = 10.0;
    bool no_noise = false;
    double noise_scale = 1.0;
    double speed_activation = 0.0;  // 0: no speed effect
    double speed_gain = 0.0;
    double dt = 0.2;
    std::uint64_t seed = 0;
    std::string out;

    void add(CLI::App* sub) {
        sub->add_option("--shape", shape, "Object shape")->check(CLI::IsMember({"square", "circle", "ellipse"}));
        sub->add_option("--size", size, "Square side, circle radius or ellipse x semi-axis [mm]")
            ->check(CLI::PositiveNumber);
        sub->add_option("--size-b", size_b, "Ellipse y semi-axis [mm]")->check(CLI::PositiveNumber);
        sub->add_option("--mu", mu, "Pusher-object friction coefficient")->check(CLI::NonNegativeNumber);
        sub->add_option("--ls-ratio", ls_ratio, "Limit-surface ratio c [mm] (0: uniform pressure)");
        sub->add_option("--sampling", sampling, "Input sampling")->check(CLI::IsMember({"random", "grid"}));
        sub->add_option("--n", n, "Sample count (random sampling)");
        sub->add_option("--v-min", v_min, "Minimum pusher speed [mm/s]");
        sub->add_option("--v-max", v_max, "Maximum pusher speed [mm/s]");
        sub->add_option("--v-values", v_values, "Discrete pusher speeds [mm/s] (random sampling)");
        sub->add_option("--c-step", c_step, "Grid step in c")->check(CLI::PositiveNumber);
        sub->add_option("--beta-step", beta_step, "Grid step in beta [rad]")->check(CLI::PositiveNumber);
        sub->add_option("--grid-v", grid_v, "Grid speeds [mm/s]");
        sub->add_option("--reps", reps, "Repetitions per grid point")->check(CLI::PositiveNumber);
        sub->add_flag("--equal-length", equal_length, "Scale windows so every push has the same length");
        sub->add_option("--v-ref", v_ref, "Reference speed for --equal-length [mm/s]");
        sub->add_flag("--no-noise", no_noise, "Noise-free outcomes");
        sub->add_option("--noise-scale", noise_scale, "Multiplier on the default noise field");
        sub->add_option("--speed-activation", speed_activation, "Speed above which dynamics deviate (0: never)");
        sub->add_option("--speed-gain", speed_gain, "Relative deviation per activation speed above it");
        sub->add_option("--dt", dt, "Window length [s]")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--out", out, "Output dataset (.csv or .json)")->required();
    }

    SynthConfig config() const {
        SynthConfig cfg;
        Shape s = shape == "square" ? Shape::square(size) : shape == "circle" ? Shape::circle(size)
                                                                              : Shape::ellipse(size, size_b);
        cfg.object = ObjectParams::uniform_pressure(s, mu);
        if (ls_ratio > 0.0) cfg.object.ls_ratio_c = ls_ratio;
        cfg.object_name = s.name();
        cfg.noise = no_noise ? NoiseField::none() : NoiseField::defaults();
        for (double& b : cfg.noise.base_std) b *= noise_scale;
        if (speed_activation > 0.0) cfg.speed_effect = {speed_activation, speed_gain};
        SamplingSpec& sp = cfg.sampling;
        sp.mode = sampling == "grid" ? SamplingSpec::Mode::grid : SamplingSpec::Mode::random;
        sp.v_min = v_min;
        sp.v_max = v_max;
        sp.v_values = v_values;
        sp.grid_v = grid_v;
        sp.grid_c = linspace_step(0.0, 1.0, c_step);
        sp.grid_beta = linspace_step(-1.5, 1.5, beta_step);
        sp.repetitions = reps;
        sp.equal_length = equal_length;
        sp.v_ref = v_ref;
        cfg.n = n;
        cfg.dt = dt;
        cfg.seed = seed;
        return cfg;
    }

    int run(const CLI::App* sub) const {
        SynthResult r = synth_generate(config());
        r.dataset.provenance = "synthetic " + shape + ", seed " + std::to_string(seed);
        save(r.dataset, out);
        write_sidecar(out, sub, {{"n_samples", r.dataset.size()}});
        std::cout << "wrote " << r.dataset.size() << " samples to " << out << '\n';
        return kOk;
    }
};

struct TrainArgs {
    std::string data, out;
    std::string features = "full";
    ModelArgs m;

    void add(CLI::App* sub) {
        sub->add_option("--data", data, "Training dataset (.csv or .json)")->required();
        sub->add_option("--features", features, "Input features")->check(CLI::IsMember({"full", "velocity_free"}));
        m.add(sub, true);
        sub->add_option("--out", out, "Model artifact (.json)")->required();
    }

    int run(const CLI::App* sub) const {
        const PushDataset ds = load(data);
        PushModelOptions o = m.options(model_kind_from_string(m.model));
        o.features = feature_set_from_string(features);
        const PushModel model = PushModel::fit(ds, o);
        json j = model.to_json();
        j["config"] = JsonConfig::options_json(sub);
        std::ofstream os = open_out(out);
        os << j.dump() << '\n';
        const auto obj = model.objectives();
        const char* what = model.kind() == ModelKind::gp ? "nlml" : "bound";
        std::cout << "output," << what << '\n';
        for (std::size_t k = 0; k < kNumOutputs; ++k) std::cout << kOutputNames[k] << ',' << format_double(obj[k]) << '\n';
        return kOk;
    }
};

struct PredictArgs {
    std::string artifact;
    double v = 20.0, c = 0.5, beta = 0.0;

    void add(CLI::App* sub) {
        sub->add_option("--artifact", artifact, "Model artifact (.json)")->required();
        sub->add_option("--v", v, "Pusher speed [mm/s]");
        sub->add_option("--c", c, "Contact coordinate in [0, 1]");
        sub->add_option("--beta", beta, "Push angle [rad]");
    }

    int run(const CLI::App*) const {
        const PushInput in{v, c, beta};
        validate_input(in);
        const PushPrediction p = PushModel::load(artifact).predict(in);
        std::cout << "mean_dx_mm,std_dx_mm,mean_dy_mm,std_dy_mm,mean_dtheta_rad,std_dtheta_rad\n";
        std::vector<double> vals;
        for (const auto& o : p) vals.insert(vals.end(), {o.mean, std::sqrt(o.variance)});
        std::cout << csv(vals) << '\n';
        return kOk;
    }
};

struct GridArgs {
    std::string artifact, out;
    double c_step = 0.05, beta_step = 0.1, beta_max = 1.5, v = 20.0, dt = 0.2;

    void add(CLI::App* sub) {
        sub->add_option("--artifact", artifact, "Model artifact (.json)")->required();
        sub->add_option("--c-step", c_step, "Step in c")->check(CLI::PositiveNumber);
        sub->add_option("--beta-step", beta_step, "Step in beta [rad]")->check(CLI::PositiveNumber);
        sub->add_option("--beta-max", beta_max, "Grid spans [-beta-max, beta-max] [rad]");
        sub->add_option("--v", v, "Pusher speed [mm/s]");
        sub->add_option("--dt", dt, "Window length [s]")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "Output CSV")->required();
    }

    int run(const CLI::App* sub) const {
        const PushModel model = PushModel::load(artifact);
        GridSpec spec;
        spec.c_values = linspace_step(0.0, 1.0, c_step);
        spec.beta_values = linspace_step(-beta_max, beta_max, beta_step);
        spec.v_p = v;
        spec.dt = dt;
        const auto rows = grid_predict(model, spec);
        std::ofstream os = open_out(out);
        os << "c,beta,mean_dx,mean_dy,mean_dtheta,std_dx,std_dy,std_dtheta\n";
        for (const GridRow& r : rows) {
            const auto& p = r.prediction;
            os << csv({r.c, r.beta, p[0].mean, p[1].mean, p[2].mean, std::sqrt(p[0].variance),
                       std::sqrt(p[1].variance), std::sqrt(p[2].variance)})
               << '\n';
        }
        const auto asym = mirror_asymmetry(rows);
        write_sidecar(out, sub, {{"rows", rows.size()}, {"mirror_asymmetry", {{"dy", asym[0]}, {"dtheta", asym[1]}}}});
        std::cout << "wrote " << rows.size() << " grid rows; mirror asymmetry dy " << format_double(asym[0])
                  << ", dtheta " << format_double(asym[1]) << '\n';
        return kOk;
    }
};

struct LearningCurveArgs {
    std::string data, out;
    std::vector<std::string> models{"analytical", "gp", "vhgp"};
    std::vector<std::size_t> sizes{50, 100, 200, 400, 800};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::size_t n_test = 0;
    double baseline_ls_scale = 0.5, baseline_mu = 0.6;
    ModelArgs m;

    void add(CLI::App* sub) {
        sub->add_option("--data", data, "Dataset (.csv or .json)")->required();
        sub->add_option("--models", models, "Subset of analytical, gp, vhgp");
        sub->add_option("--sizes", sizes, "Training-set sizes");
        sub->add_option("--seeds", seeds, "Resampling seeds");
        sub->add_option("--n-test", n_test, "Test-set size (0: all samples beyond the largest size)");
        sub->add_option("--baseline-ls-scale", baseline_ls_scale, "Analytical baseline limit-surface ratio scale");
        sub->add_option("--baseline-mu", baseline_mu, "Analytical baseline friction coefficient");
        m.add(sub, false);
        sub->add_option("--out", out, "Output CSV")->required();
    }

    int run(const CLI::App* sub) const {
        const PushDataset ds = load(data);
        LearningCurveOptions o;
        o.models = models;
        o.sizes = sizes;
        o.seeds = seeds;
        o.n_test = n_test;
        o.gp = m.options(ModelKind::gp);
        o.vhgp = m.options(ModelKind::vhgp);
        o.baseline = miscalibrated(ObjectParams{}, baseline_ls_scale, baseline_mu);
        std::ofstream os = open_out(out);
        os << "model,n_train,seed,nmse_total,nlpd_total,nmse_dx,nmse_dy,nmse_dtheta\n";
        learning_curve(ds, o, [&](const LearningCurveRow& r) {
            os << r.model << ',' << r.n_train << ',' << r.seed << ',' << format_double(r.report.nmse_total) << ','
               << (std::isfinite(r.report.nlpd_total) ? format_double(r.report.nlpd_total) : "") << ','
               << csv({r.report.nmse_per_output.begin(), r.report.nmse_per_output.end()}) << '\n'
               << std::flush;
            std::cerr << r.model << " n=" << r.n_train << " seed=" << r.seed
                      << " nmse=" << format_double(r.report.nmse_total) << '\n';
        });
        write_sidecar(out, sub);
        return kOk;
    }
};

struct ValidateKlArgs {
    std::string artifact, data, out;
    double floor_displacement = 0.05, floor_rotation = 0.002;

    void add(CLI::App* sub) {
        sub->add_option("--artifact", artifact, "Model artifact (.json)")->required();
        sub->add_option("--data", data, "Repeated-push dataset with rep_id")->required();
        sub->add_option("--floor-displacement", floor_displacement, "Std floor for dx, dy [mm]");
        sub->add_option("--floor-rotation", floor_rotation, "Std floor for dtheta [rad]");
        sub->add_option("--out", out, "Per-group CSV")->required();
    }

    int run(const CLI::App* sub) const {
        const PushModel model = PushModel::load(artifact);
        const KLValidation v = validate_kl(model, group_repeats(load(data)), {floor_displacement, floor_rotation});
        std::ofstream os = open_out(out);
        os << "v_p,c,beta,count,kl_total,kl_dx,kl_dy,kl_dtheta,floored,excluded\n";
        for (const KLGroupRow& r : v.rows) {
            const auto& in = r.group.input;
            os << csv({in.v_p, in.c, in.beta}) << ',' << r.group.count << ',';
            if (r.excluded) os << ",,,,0,1\n";
            else os << csv({r.kl.total, r.kl.per_output[0], r.kl.per_output[1], r.kl.per_output[2]}) << ','
                    << (r.kl.any_floored() ? 1 : 0) << ",0\n";
        }
        const KLSummary& s = v.summary;
        json sum{{"average", s.average},
                 {"median", s.median},
                 {"average_per_output", s.average_per_output},
                 {"median_per_output", s.median_per_output},
                 {"n_groups", s.n_groups},
                 {"n_excluded", s.n_excluded},
                 {"n_floored", s.n_floored}};
        write_sidecar(out, sub, {{"summary", sum}});
        std::cout << "groups " << s.n_groups << " (excluded " << s.n_excluded << ", floored " << s.n_floored
                  << "); average KL " << format_double(s.average) << ", median KL " << format_double(s.median) << '\n';
        return kOk;
    }
};

struct QuasistaticArgs {
    std::string data, out;
    std::vector<double> brackets;
    double v_ref = 10.0, test_fraction = 0.3;
    ModelArgs m;

    void add(CLI::App* sub) {
        sub->add_option("--data", data, "Dataset spanning several speeds")->required();
        sub->add_option("--brackets", brackets, "Maximum speeds included, ascending [mm/s]")->required();
        sub->add_option("--v-ref", v_ref, "Reference speed for time scaling [mm/s]");
        sub->add_option("--test-fraction", test_fraction, "Held-out fraction per bracket");
        m.model = "gp";
        m.add(sub, true);
        sub->add_option("--out", out, "Output CSV")->required();
    }

    int run(const CLI::App* sub) const {
        QuasistaticOptions o;
        o.brackets = brackets;
        o.v_ref = v_ref;
        o.test_fraction = test_fraction;
        o.seed = m.seed;
        o.model = m.options(model_kind_from_string(m.model));
        std::ofstream os = open_out(out);
        os << "max_speed,n_train,n_test,nmse_total,nmse_dx,nmse_dy,nmse_dtheta\n";
        quasistatic(load(data), o, [&](const QuasistaticRow& r) {
            os << format_double(r.max_speed) << ',' << r.n_train << ',' << r.n_test << ','
               << format_double(r.report.nmse_total) << ','
               << csv({r.report.nmse_per_output.begin(), r.report.nmse_per_output.end()}) << '\n'
               << std::flush;
        });
        write_sidecar(out, sub);
        return kOk;
    }
};

}  // namespace pushgp::cli

int main(int argc, char** argv) {
    using namespace pushgp::cli;
    CLI::App app{"Gaussian-process models of planar pushing"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.config_formatter(std::make_shared<JsonConfig>(&app));
    app.set_config("--config", "", "JSON file with option values (flags override it)");
    app.fallthrough();

    SynthArgs synth;
    TrainArgs train;
    PredictArgs predict;
    GridArgs grid;
    LearningCurveArgs lc;
    ValidateKlArgs kl;
    QuasistaticArgs qs;

    auto add = [&](const char* name, const char* help, auto& args) {
        CLI::App* sub = app.add_subcommand(name, help);
        args.add(sub);
        return sub;
    };
    CLI::App* s_synth = add("synth", "Generate a synthetic pushing dataset", synth);
    CLI::App* s_train = add("train", "Fit three per-output models and save an artifact", train);
    CLI::App* s_predict = add("predict", "Predict mean and std for one push", predict);
    CLI::App* s_grid = add("grid", "Predict over a (c, beta) grid", grid);
    CLI::App* s_lc = add("learning-curve", "NMSE/NLPD against training-set size", lc);
    CLI::App* s_kl = add("validate-kl", "KL divergence against repeated-push groups", kl);
    CLI::App* s_qs = add("quasistatic", "NMSE of velocity-free models per speed bracket", qs);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (s_synth->parsed()) return synth.run(s_synth);
        if (s_train->parsed()) return train.run(s_train);
        if (s_predict->parsed()) return predict.run(s_predict);
        if (s_grid->parsed()) return grid.run(s_grid);
        if (s_lc->parsed()) return lc.run(s_lc);
        if (s_kl->parsed()) return kl.run(s_kl);
        if (s_qs->parsed()) return qs.run(s_qs);
    } catch (const pushgp::ParseError& e) {
        std::cerr << "data error (row " << e.row() << ", column " << e.column() << "): " << e.what() << '\n';
        return kData;
    } catch (const pushgp::InputError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const pushgp::FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const pushgp::ConditioningError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const pushgp::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumerical;
    }
    return kUsage;
}
