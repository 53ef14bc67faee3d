#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushgp/errors.hpp"
#include "pushgp/push_types.hpp"
#include "pushgp/pushmodel.hpp"

namespace pushgp {

inline constexpr std::array<std::string_view, 10> kCsvColumns{
    "object", "surface", "v_p_mm_s", "c", "beta_rad", "dt_s", "dx_mm", "dy_mm", "dtheta_rad", "rep_id"};

inline constexpr std::string_view kDatasetFormat = "pushgp-dataset";
inline constexpr int kDatasetVersion = 1;

enum class DataFormat { csv, json };

struct ValidationOptions {
    // Reject outcomes whose planar displacement exceeds v_p * dt * (1 + slack).
    // Off by default: additive sensor noise legitimately breaks it near v_p = 0.
    bool check_speed_bound = false;
    double speed_slack = 0.2;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s, std::size_t row, std::size_t col) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::string(kCsvColumns[col]) +
                             ": cannot parse number '" + std::string(s) + "'",
                         row, std::string(kCsvColumns[col]));
    }
    return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline void range_error(std::size_t row, std::size_t col, const std::string& msg) {
    throw ParseError("row " + std::to_string(row) + ", column " + std::string(kCsvColumns[col]) + ": " + msg, row,
                     std::string(kCsvColumns[col]));
}

}  // namespace detail

/// Checks one sample against the unit and range conventions. `row` is used
/// only for error messages (1-based data row).
inline void validate_sample(const PushSample& s, std::size_t row, const ValidationOptions& opt = {}) {
    const double vals[] = {s.input.v_p, s.input.c, s.input.beta, s.dt, s.outcome.dx, s.outcome.dy, s.outcome.dtheta};
    const std::size_t cols[] = {2, 3, 4, 5, 6, 7, 8};
    for (int i = 0; i < 7; ++i)
        if (!std::isfinite(vals[i])) detail::range_error(row, cols[i], "non-finite value");
    if (s.input.v_p < 0.0) detail::range_error(row, 2, "v_p must be >= 0");
    if (s.input.c < 0.0 || s.input.c > 1.0) detail::range_error(row, 3, "c out of range [0, 1]");
    if (std::abs(s.input.beta) > 0.5 * std::numbers::pi) detail::range_error(row, 4, "|beta| exceeds pi/2");
    if (!(s.dt > 0.0)) detail::range_error(row, 5, "dt must be > 0");
    if (opt.check_speed_bound &&
        std::hypot(s.outcome.dx, s.outcome.dy) > s.input.v_p * s.dt * (1.0 + opt.speed_slack)) {
        detail::range_error(row, 6, "displacement exceeds pusher travel");
    }
}

// ---------------------------------------------------------------------------
// Canonical CSV
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& os, const PushDataset& ds) {
    if (!ds.provenance.empty()) os << "# provenance: " << ds.provenance << '\n';
    const bool synthetic = !ds.empty() && std::all_of(ds.samples.begin(), ds.samples.end(), [](const PushSample& s) {
        return s.source == SampleSource::synthetic;
    });
    if (!ds.empty()) os << "# source: " << (synthetic ? "synthetic" : "real") << '\n';
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) os << (i ? "," : "") << kCsvColumns[i];
    os << '\n';
    using detail::format_double;
    for (const PushSample& s : ds.samples) {
        if (s.object.find(',') != std::string::npos || s.surface.find(',') != std::string::npos) {
            throw InputError("object and surface ids must not contain commas");
        }
        os << s.object << ',' << s.surface << ',' << format_double(s.input.v_p) << ',' << format_double(s.input.c)
           << ',' << format_double(s.input.beta) << ',' << format_double(s.dt) << ','
           << format_double(s.outcome.dx) << ',' << format_double(s.outcome.dy) << ','
           << format_double(s.outcome.dtheta) << ',';
        if (s.rep_id) os << *s.rep_id;
        os << '\n';
    }
}

inline PushDataset read_csv(std::istream& is, const ValidationOptions& opt = {}) {
    PushDataset ds;
    SampleSource source = SampleSource::real;
    std::string line;
    bool header_seen = false;
    std::size_t row = 0;
    std::optional<double> common_dt;
    bool mixed_dt = false;
    while (std::getline(is, line)) {
        const std::string_view l = detail::trim(line);
        if (!header_seen) {
            if (l.empty()) continue;
            if (l.front() == '#') {
                const std::string_view body = detail::trim(l.substr(1));
                if (body.starts_with("provenance:")) ds.provenance = std::string(detail::trim(body.substr(11)));
                if (body.starts_with("source:")) {
                    source = detail::trim(body.substr(7)) == "synthetic" ? SampleSource::synthetic : SampleSource::real;
                }
                continue;
            }
            const auto cols = detail::split_commas(l);
            bool ok = cols.size() == kCsvColumns.size();
            for (std::size_t i = 0; ok && i < cols.size(); ++i) ok = detail::trim(cols[i]) == kCsvColumns[i];
            if (!ok) throw FormatError("CSV header does not match the canonical schema: '" + std::string(l) + "'");
            header_seen = true;
            continue;
        }
        if (l.empty()) continue;
        ++row;
        const auto f = detail::split_commas(l);
        if (f.size() != kCsvColumns.size()) {
            throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(kCsvColumns.size()) +
                                 " fields, found " + std::to_string(f.size()),
                             row, std::string(kCsvColumns[std::min(f.size(), kCsvColumns.size() - 1)]));
        }
        PushSample s;
        s.object = std::string(detail::trim(f[0]));
        s.surface = std::string(detail::trim(f[1]));
        s.input.v_p = detail::parse_double(f[2], row, 2);
        s.input.c = detail::parse_double(f[3], row, 3);
        s.input.beta = detail::parse_double(f[4], row, 4);
        s.dt = detail::parse_double(f[5], row, 5);
        s.outcome.dx = detail::parse_double(f[6], row, 6);
        s.outcome.dy = detail::parse_double(f[7], row, 7);
        s.outcome.dtheta = detail::parse_double(f[8], row, 8);
        const std::string_view rep = detail::trim(f[9]);
        if (!rep.empty()) {
            int r = 0;
            const auto res = std::from_chars(rep.data(), rep.data() + rep.size(), r);
            if (res.ec != std::errc() || res.ptr != rep.data() + rep.size()) {
                detail::range_error(row, 9, "rep_id must be an integer");
            }
            s.rep_id = r;
        }
        s.source = source;
        validate_sample(s, row, opt);
        if (!common_dt) common_dt = s.dt;
        else if (*common_dt != s.dt) mixed_dt = true;
        ds.samples.push_back(std::move(s));
    }
    if (!header_seen) throw FormatError("CSV input has no header line");
    if (common_dt && !mixed_dt) ds.dt = *common_dt;
    else if (common_dt) ds.dt = ds.samples.front().dt;
    return ds;
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PushDataset& ds) {
    nlohmann::json j;
    j["format"] = kDatasetFormat;
    j["version"] = kDatasetVersion;
    j["dt_s"] = ds.dt;
    j["provenance"] = ds.provenance;
    nlohmann::json arr = nlohmann::json::array();
    for (const PushSample& s : ds.samples) {
        nlohmann::json o;
        o["object"] = s.object;
        o["surface"] = s.surface;
        o["v_p_mm_s"] = s.input.v_p;
        o["c"] = s.input.c;
        o["beta_rad"] = s.input.beta;
        o["dt_s"] = s.dt;
        o["dx_mm"] = s.outcome.dx;
        o["dy_mm"] = s.outcome.dy;
        o["dtheta_rad"] = s.outcome.dtheta;
        o["rep_id"] = s.rep_id ? nlohmann::json(*s.rep_id) : nlohmann::json(nullptr);
        o["source"] = to_string(s.source);
        arr.push_back(std::move(o));
    }
    j["samples"] = std::move(arr);
    return j;
}

inline PushDataset from_json(const nlohmann::json& j, const ValidationOptions& opt = {}) {
    if (!j.is_object() || j.value("format", "") != kDatasetFormat) {
        throw FormatError("JSON document is not a pushgp dataset");
    }
    if (j.value("version", -1) != kDatasetVersion) throw FormatError("unsupported dataset version");
    PushDataset ds;
    ds.dt = j.value("dt_s", 0.2);
    ds.provenance = j.value("provenance", "");
    if (!j.contains("samples") || !j["samples"].is_array()) throw FormatError("dataset has no samples array");
    std::size_t row = 0;
    for (const auto& o : j["samples"]) {
        ++row;
        auto num = [&](std::size_t col) -> double {
            const auto key = std::string(kCsvColumns[col]);
            if (!o.contains(key) || !o[key].is_number()) detail::range_error(row, col, "missing or non-numeric field");
            return o[key].get<double>();
        };
        PushSample s;
        s.object = o.value("object", "");
        s.surface = o.value("surface", "");
        s.input = {num(2), num(3), num(4)};
        s.dt = num(5);
        s.outcome = {num(6), num(7), num(8)};
        if (o.contains("rep_id") && !o["rep_id"].is_null()) {
            if (!o["rep_id"].is_number_integer()) detail::range_error(row, 9, "rep_id must be an integer");
            s.rep_id = o["rep_id"].get<int>();
        }
        s.source = o.value("source", "real") == "synthetic" ? SampleSource::synthetic : SampleSource::real;
        validate_sample(s, row, opt);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

inline DataFormat format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".json" ? DataFormat::json : DataFormat::csv;
}

inline void save(const PushDataset& ds, const std::filesystem::path& path, std::optional<DataFormat> format = {}) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot open '" + path.string() + "' for writing");
    if (format.value_or(format_from_path(path)) == DataFormat::json) os << to_json(ds).dump(1) << '\n';
    else write_csv(os, ds);
    if (!os) throw InputError("failed writing '" + path.string() + "'");
}

inline PushDataset load(const std::filesystem::path& path, std::optional<DataFormat> format = {},
                        const ValidationOptions& opt = {}) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError("cannot open '" + path.string() + "'");
    if (format.value_or(format_from_path(path)) == DataFormat::json) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            throw FormatError(std::string("invalid JSON: ") + e.what());
        }
        return from_json(j, opt);
    }
    return read_csv(is, opt);
}

// ---------------------------------------------------------------------------
// Trajectory windowing
// ---------------------------------------------------------------------------

struct WindowOptions {
    double stride = 0.0;  // window start spacing [s]; 0 means dt (non-overlapping)
    std::string object = "object";
    std::string surface = "default";
    SampleSource source = SampleSource::real;
};

struct WindowResult {
    std::vector<PushSample> samples;
    std::size_t skipped = 0;  // windows dropped because of timestamp gaps
};

/// Cuts a timestamped pusher/object trajectory into windows of length dt.
/// Inputs come from the pusher state at each window start: the speed and
/// push direction by forward difference, and (c, beta) from the nearest
/// boundary location of `shape`. Outcomes are the object pose change over
/// the window, expressed in the push-direction frame.
inline WindowResult window(const std::vector<TrajectoryPoint>& traj, double dt, const Shape& shape,
                           const WindowOptions& opt = {}) {
    if (!(dt > 0.0)) throw InputError("window: dt must be > 0");
    if (traj.size() < 2) throw InputError("window: trajectory needs at least two points");
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (!(traj[i].t > traj[i - 1].t)) throw InputError("window: timestamps must be strictly increasing");
    }
    const double t_begin = traj.front().t, t_end = traj.back().t;
    const double eps = 1e-9 * std::max(1.0, std::abs(t_end));
    if (t_end - t_begin < dt - eps) throw InputError("window: trajectory shorter than dt");
    const double stride = opt.stride > 0.0 ? opt.stride : dt;
    const Boundary boundary(shape);

    // Index of the last point with t <= query, then linear interpolation.
    auto locate = [&](double t) {
        const auto it = std::upper_bound(traj.begin(), traj.end(), t,
                                         [](double v, const TrajectoryPoint& p) { return v < p.t; });
        std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - traj.begin()) - 1));
        return std::min(i, traj.size() - 2);
    };
    auto sample_at = [&](double t) {
        const std::size_t i = locate(t);
        const TrajectoryPoint& a = traj[i];
        const TrajectoryPoint& b = traj[i + 1];
        const double w = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
        TrajectoryPoint p;
        p.t = t;
        p.pusher = (1.0 - w) * a.pusher + w * b.pusher;
        p.object = (1.0 - w) * a.object + w * b.object;
        return p;
    };

    WindowResult out;
    for (std::size_t k = 0;; ++k) {
        const double t0 = t_begin + static_cast<double>(k) * stride;
        const double t1 = t0 + dt;
        if (t1 > t_end + eps) break;

        // Gap check over the samples covering [t0, t1].
        bool gap = false;
        for (std::size_t i = locate(t0); i + 1 < traj.size() && traj[i].t < t1 - eps; ++i) {
            if (traj[i + 1].t - traj[i].t > 0.5 * dt) gap = true;
        }
        if (gap) {
            ++out.skipped;
            continue;
        }

        const TrajectoryPoint p0 = sample_at(t0);
        const TrajectoryPoint p1 = sample_at(std::min(t1, t_end));
        // Forward difference over the first trajectory interval after t0.
        const std::size_t i0 = locate(t0 + eps);
        const double t_next = std::min(traj[i0 + 1].t, t1);
        const TrajectoryPoint pn = sample_at(t_next);
        const Eigen::Vector2d vel = (pn.pusher - p0.pusher) / (t_next - t0);
        const double speed = vel.norm();

        PushSample s;
        s.dt = dt;
        s.object = opt.object;
        s.surface = opt.surface;
        s.source = opt.source;
        s.input.v_p = speed;

        const double th0 = p0.object(2);
        const Eigen::Vector2d q = Boundary::rotate(p0.pusher - p0.object.head<2>(), -th0);
        const Boundary::Location loc = boundary.locate(q);
        s.input.c = std::clamp(boundary.c_from_param(loc.param), 0.0, 1.0);
        const Eigen::Vector2d n = Boundary::rotate(boundary.frame(loc.param).normal, loc.edge_angle);
        if (speed > 0.0) {
            const Eigen::Vector2d d = Boundary::rotate(vel / speed, -th0);
            s.input.beta = std::atan2(n.x() * d.y() - n.y() * d.x(), n.dot(d));
        }
        const Eigen::Vector2d disp = p1.object.head<2>() - p0.object.head<2>();
        const Eigen::Vector2d dir = speed > 0.0 ? Eigen::Vector2d(vel / speed) : Boundary::rotate(n, th0);
        const Eigen::Vector2d local = pusher_frame(disp, dir);
        s.outcome = {local.x(), local.y(), p1.object(2) - th0};
        out.samples.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Repeated pushes and splits
// ---------------------------------------------------------------------------

struct RepeatedPushGroup {
    PushInput input;
    PushOutcome empirical_mean;
    std::array<double, kNumOutputs> empirical_std{0.0, 0.0, 0.0};
    std::size_t count = 0;
    bool std_defined() const { return count >= 2; }
};

/// One group per distinct (v_p, c, beta), ordered by that key. Only samples
/// carrying a repetition id take part. Standard deviations use the unbiased
/// (n - 1) estimator and are NaN for singleton groups.
inline std::vector<RepeatedPushGroup> group_repeats(const PushDataset& ds) {
    std::map<std::tuple<double, double, double>, std::vector<const PushSample*>> groups;
    bool any = false;
    for (const PushSample& s : ds.samples) {
        if (!s.rep_id) continue;
        any = true;
        groups[{s.input.v_p, s.input.c, s.input.beta}].push_back(&s);
    }
    if (!any && !ds.empty()) throw InputError("group_repeats: dataset has no repetition ids");
    std::vector<RepeatedPushGroup> out;
    out.reserve(groups.size());
    for (auto& [key, members] : groups) {
        // Sum in a fixed order so the result does not depend on input order.
        std::sort(members.begin(), members.end(), [](const PushSample* a, const PushSample* b) {
            for (std::size_t k = 0; k < kNumOutputs; ++k)
                if (a->outcome[k] != b->outcome[k]) return a->outcome[k] < b->outcome[k];
            return *a->rep_id < *b->rep_id;
        });
        RepeatedPushGroup g;
        g.input = {std::get<0>(key), std::get<1>(key), std::get<2>(key)};
        g.count = members.size();
        const double n = static_cast<double>(g.count);
        for (std::size_t k = 0; k < kNumOutputs; ++k) {
            // Shifted by the first member: identical outcomes give exactly zero spread.
            const double x0 = members.front()->outcome[k];
            double dm = 0.0;
            for (const PushSample* s : members) dm += s->outcome[k] - x0;
            dm /= n;
            g.empirical_mean[k] = x0 + dm;
            if (g.count < 2) {
                g.empirical_std[k] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double ss = 0.0;
            for (const PushSample* s : members) {
                const double r = s->outcome[k] - x0 - dm;
                ss += r * r;
            }
            g.empirical_std[k] = std::sqrt(ss / (n - 1.0));
        }
        out.push_back(g);
    }
    return out;
}

/// Deterministic shuffle split: the first n_train shuffled samples train.
inline std::pair<PushDataset, PushDataset> split(const PushDataset& ds, std::size_t n_train, std::uint64_t seed) {
    if (n_train >= ds.size()) throw InputError("split: n_train must be smaller than the dataset");
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    PushDataset train, test;
    train.dt = test.dt = ds.dt;
    train.provenance = test.provenance = ds.provenance;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_train ? train : test).samples.push_back(ds.samples[idx[i]]);
    return {std::move(train), std::move(test)};
}

/// Samples whose predicate holds, keeping dataset metadata.
template <class Pred>
PushDataset filter(const PushDataset& ds, Pred&& pred) {
    PushDataset out;
    out.dt = ds.dt;
    out.provenance = ds.provenance;
    for (const PushSample& s : ds.samples)
        if (pred(s)) out.samples.push_back(s);
    return out;
}

}  // namespace pushgp
