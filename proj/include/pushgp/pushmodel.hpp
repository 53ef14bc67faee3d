#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pushgp/errors.hpp"
#include "pushgp/push_types.hpp"

namespace pushgp {

// ---------------------------------------------------------------------------
// Object description
// ---------------------------------------------------------------------------

enum class ShapeKind { square, circle, ellipse };

/// Planar footprint of the pushed object. For a square, a = b = side length;
/// for a circle a = b = radius; for an ellipse a, b are the semi-axes along
/// the object x and y axes.
struct Shape {
    ShapeKind kind = ShapeKind::square;
    double a = 90.0;
    double b = 90.0;

    static Shape square(double side) { return {ShapeKind::square, side, side}; }
    static Shape circle(double radius) { return {ShapeKind::circle, radius, radius}; }
    static Shape ellipse(double semi_x, double semi_y) { return {ShapeKind::ellipse, semi_x, semi_y}; }

    std::string name() const {
        switch (kind) {
            case ShapeKind::square: return "square";
            case ShapeKind::circle: return "circle";
            case ShapeKind::ellipse: return "ellipse";
        }
        return "unknown";
    }

    double perimeter() const {
        switch (kind) {
            case ShapeKind::square: return 4.0 * a;
            case ShapeKind::circle: return 2.0 * std::numbers::pi * a;
            case ShapeKind::ellipse: {
                // Composite Simpson over the parametric speed; smooth and periodic.
                constexpr int N = 4096;
                const double h = 2.0 * std::numbers::pi / N;
                double s = 0.0;
                for (int i = 0; i < N; ++i) {
                    const double t = i * h;
                    s += std::hypot(a * std::sin(t), b * std::cos(t));
                }
                return s * h;
            }
        }
        return 0.0;
    }
};

/// Mean distance from the centroid under uniform pressure, i.e. the ratio
/// max friction torque / max friction force of the ellipsoidal limit surface.
inline double uniform_pressure_ls_ratio(const Shape& shape) {
    switch (shape.kind) {
        case ShapeKind::square: return shape.a * (std::numbers::sqrt2 + std::asinh(1.0)) / 6.0;
        case ShapeKind::circle: return 2.0 * shape.a / 3.0;
        case ShapeKind::ellipse: return shape.perimeter() / (3.0 * std::numbers::pi);
    }
    return 0.0;
}

struct ObjectParams {
    Shape shape = Shape::square(90.0);
    double ls_ratio_c = uniform_pressure_ls_ratio(Shape::square(90.0));  // [mm]
    double mu_contact = 0.25;

    static ObjectParams uniform_pressure(const Shape& s, double mu = 0.25) {
        return {s, uniform_pressure_ls_ratio(s), mu};
    }

    void validate() const {
        if (!(shape.a > 0.0) || !(shape.b > 0.0)) throw InputError("object dimensions must be positive");
        if (!(ls_ratio_c > 0.0) || !std::isfinite(ls_ratio_c)) throw InputError("ls_ratio_c must be positive");
        if (!(mu_contact >= 0.0)) throw InputError("mu_contact must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Contact geometry
// ---------------------------------------------------------------------------

struct ContactFrame {
    Eigen::Vector2d point;    // object frame
    Eigen::Vector2d normal;   // inward unit normal
    Eigen::Vector2d tangent;  // unit tangent in the direction of increasing parameter
    double speed = 1.0;       // |dpoint / dparam|
};

/// Boundary parametrization used by the contact model.
///
/// Square: the pushed edge is x = -side/2 and the parameter is the arc length
/// from its first vertex (-side/2, -side/2) toward (-side/2, +side/2).
/// Round shapes: point(phi) = (-a cos phi, b sin phi); c is the perimeter
/// fraction measured from phi = 0 (the leftmost point).
class Boundary {
public:
    explicit Boundary(const Shape& shape) : shape_(shape) {
        if (shape.kind == ShapeKind::ellipse) build_arc_table();
    }

    const Shape& shape() const { return shape_; }

    double param_from_c(double c) const {
        switch (shape_.kind) {
            case ShapeKind::square: return c * shape_.a;
            case ShapeKind::circle: return 2.0 * std::numbers::pi * c;
            case ShapeKind::ellipse: return interp(arc_, phi_, c * arc_.back());
        }
        return 0.0;
    }

    double c_from_param(double p) const {
        switch (shape_.kind) {
            case ShapeKind::square: return p / shape_.a;
            case ShapeKind::circle: return wrap_2pi(p) / (2.0 * std::numbers::pi);
            case ShapeKind::ellipse: return interp(phi_, arc_, wrap_2pi(p)) / arc_.back();
        }
        return 0.0;
    }

    bool in_contact_range(double p) const {
        return shape_.kind != ShapeKind::square || (p >= 0.0 && p <= shape_.a);
    }

    ContactFrame frame(double p) const {
        ContactFrame f;
        if (shape_.kind == ShapeKind::square) {
            const double h = 0.5 * shape_.a;
            f.point = {-h, p - h};
            f.tangent = {0.0, 1.0};
            f.normal = {1.0, 0.0};
            f.speed = 1.0;
            return f;
        }
        const double ca = std::cos(p), sa = std::sin(p);
        f.point = {-shape_.a * ca, shape_.b * sa};
        const Eigen::Vector2d d(shape_.a * sa, shape_.b * ca);
        f.speed = d.norm();
        f.tangent = d / f.speed;
        // The parametrization runs clockwise, so the inward normal is the
        // tangent rotated by -90 degrees.
        f.normal = {f.tangent.y(), -f.tangent.x()};
        return f;
    }

    /// Nearest boundary location to a point given in the object frame.
    /// `edge_angle` is the rotation mapping the canonical pushed edge onto the
    /// located one (multiples of pi/2 for the square, 0 for round shapes).
    struct Location {
        double param = 0.0;
        double edge_angle = 0.0;
        double distance = 0.0;
    };

    Location locate(const Eigen::Vector2d& q) const {
        Location best;
        best.distance = std::numeric_limits<double>::infinity();
        if (shape_.kind == ShapeKind::square) {
            const double h = 0.5 * shape_.a;
            for (int k = 0; k < 4; ++k) {
                const double ang = k * 0.5 * std::numbers::pi;
                const Eigen::Vector2d r = rotate(q, -ang);
                const double p = std::clamp(r.y() + h, 0.0, shape_.a);
                const double dist = (r - Eigen::Vector2d(-h, p - h)).norm();
                if (dist < best.distance) best = {p, ang, dist};
            }
            return best;
        }
        constexpr int N = 720;
        for (int i = 0; i < N; ++i) {
            const double p = 2.0 * std::numbers::pi * i / N;
            const double dist = (frame(p).point - q).norm();
            if (dist < best.distance) best = {p, 0.0, dist};
        }
        // Newton refinement on (P(phi) - q) . P'(phi) = 0.
        double p = best.param;
        for (int it = 0; it < 20; ++it) {
            const double ca = std::cos(p), sa = std::sin(p);
            const Eigen::Vector2d P(-shape_.a * ca, shape_.b * sa);
            const Eigen::Vector2d d1(shape_.a * sa, shape_.b * ca);
            const Eigen::Vector2d d2(shape_.a * ca, -shape_.b * sa);
            const double g = (P - q).dot(d1);
            const double gp = d1.squaredNorm() + (P - q).dot(d2);
            if (gp <= 0.0) break;
            const double step = g / gp;
            p -= step;
            if (std::abs(step) < 1e-15) break;
        }
        best.param = wrap_2pi(p);
        best.distance = (frame(best.param).point - q).norm();
        return best;
    }

    static Eigen::Vector2d rotate(const Eigen::Vector2d& v, double ang) {
        const double c = std::cos(ang), s = std::sin(ang);
        return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
    }

private:
    static double wrap_2pi(double p) {
        const double tp = 2.0 * std::numbers::pi;
        p = std::fmod(p, tp);
        return p < 0.0 ? p + tp : p;
    }

    // Piecewise-linear interpolation of ys over increasing xs.
    static double interp(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
        if (x <= xs.front()) return ys.front();
        if (x >= xs.back()) return ys.back();
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin());
        const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        return ys[i - 1] + t * (ys[i] - ys[i - 1]);
    }

    void build_arc_table() {
        constexpr int N = 8192;
        phi_.resize(N + 1);
        arc_.resize(N + 1);
        const double h = 2.0 * std::numbers::pi / N;
        auto speed = [&](double t) { return std::hypot(shape_.a * std::sin(t), shape_.b * std::cos(t)); };
        arc_[0] = 0.0;
        phi_[0] = 0.0;
        for (int i = 1; i <= N; ++i) {
            const double t0 = (i - 1) * h, t1 = i * h;
            phi_[i] = t1;
            arc_[i] = arc_[i - 1] + h / 6.0 * (speed(t0) + 4.0 * speed(0.5 * (t0 + t1)) + speed(t1));
        }
    }

    Shape shape_;
    std::vector<double> phi_, arc_;
};

// ---------------------------------------------------------------------------
// Quasi-static point pushing with an ellipsoidal limit surface
// ---------------------------------------------------------------------------

enum class ContactMode { stick, slide_up, slide_down, separate };

inline const char* to_string(ContactMode m) {
    switch (m) {
        case ContactMode::stick: return "stick";
        case ContactMode::slide_up: return "slide_up";
        case ContactMode::slide_down: return "slide_down";
        case ContactMode::separate: return "separate";
    }
    return "unknown";
}

struct Twist {
    Eigen::Vector2d v = Eigen::Vector2d::Zero();  // object-frame COM velocity
    double omega = 0.0;
    ContactMode mode = ContactMode::separate;
};

/// Object twist produced by a pusher moving with velocity u (object frame) at
/// the contact described by `f`.
inline Twist quasi_static_twist(const ContactFrame& f, const Eigen::Vector2d& u, double ls_ratio, double mu) {
    Twist tw;
    const double un = u.dot(f.normal);
    if (!(un > 0.0)) return tw;
    const double c2 = ls_ratio * ls_ratio;
    const double px = f.point.x(), py = f.point.y();

    // Sticking contact: the contact point moves with the pusher.
    const double den = c2 + px * px + py * py;
    const Eigen::Vector2d vs(((c2 + px * px) * u.x() + px * py * u.y()) / den,
                             (px * py * u.x() + (c2 + py * py) * u.y()) / den);
    // Under the ellipsoidal limit surface the contact force is parallel to vs.
    const double fn = vs.dot(f.normal);
    const double ft = vs.dot(f.tangent);
    if (fn > 0.0 && std::abs(ft) <= mu * fn) {
        tw.v = vs;
        tw.omega = (px * vs.y() - py * vs.x()) / c2;
        tw.mode = ContactMode::stick;
        return tw;
    }

    // Sliding: the force lies on the friction cone edge on the side the
    // sticking force would have needed. Without a finite cone edge a tensile
    // sticking force means the pusher leaves the object.
    if (!std::isfinite(mu)) return tw;
    const double side = ft >= 0.0 ? 1.0 : -1.0;
    const Eigen::Vector2d fe = f.normal + side * mu * f.tangent;
    const double me = px * fe.y() - py * fe.x();
    const Eigen::Vector2d vc1 = fe + (me / c2) * Eigen::Vector2d(-py, px);
    const double scale_den = vc1.dot(f.normal);
    if (!(scale_den > 1e-12)) return tw;
    const double k = un / scale_den;
    tw.v = k * fe;
    tw.omega = k * me / c2;
    tw.mode = side > 0.0 ? ContactMode::slide_up : ContactMode::slide_down;
    return tw;
}

struct SimulationOptions {
    double max_step = 1e-3;  // [s]
    bool record_trajectory = false;
};

struct TrajectoryPoint {
    double t = 0.0;
    Eigen::Vector2d pusher = Eigen::Vector2d::Zero();  // world
    Eigen::Vector3d object = Eigen::Vector3d::Zero();  // world pose (x, y, theta)
};

struct PushResult {
    PushOutcome outcome;
    bool separated = false;  // contact was lost (or never established)
    ContactMode initial_mode = ContactMode::separate;
    std::vector<TrajectoryPoint> trajectory;  // filled when record_trajectory is set
};

inline void validate_input(const PushInput& in) {
    if (!std::isfinite(in.v_p) || !std::isfinite(in.c) || !std::isfinite(in.beta)) {
        throw InputError("push input has non-finite fields");
    }
    if (in.v_p < 0.0) throw InputError("v_p must be >= 0");
    if (in.c < 0.0 || in.c > 1.0) throw InputError("c must lie in [0, 1]");
}

/// Expresses a world displacement in the frame whose x axis is the push direction.
inline Eigen::Vector2d pusher_frame(const Eigen::Vector2d& world_displacement, const Eigen::Vector2d& push_direction) {
    const double len = push_direction.norm();
    if (!(len > 0.0) || !std::isfinite(len)) throw InputError("pusher_frame: zero-length push direction");
    const Eigen::Vector2d e = push_direction / len;
    return {e.dot(world_displacement), e.x() * world_displacement.y() - e.y() * world_displacement.x()};
}

/// Contact mode at the start of a push.
inline ContactMode motion_cone_mode(const PushInput& input, const ObjectParams& obj) {
    validate_input(input);
    obj.validate();
    if (std::abs(input.beta) >= 0.5 * std::numbers::pi) return ContactMode::separate;
    const Boundary boundary(obj.shape);
    const ContactFrame f = boundary.frame(boundary.param_from_c(input.c));
    const Eigen::Vector2d dir = Boundary::rotate(f.normal, input.beta);
    return quasi_static_twist(f, dir, obj.ls_ratio_c, obj.mu_contact).mode;
}

/// Quasi-static push of duration dt: the pusher moves in a straight line at
/// speed v_p, starting at contact coordinate c with angle beta from the inward
/// normal. The object twist follows the ellipsoidal limit surface; the
/// contact mode is re-resolved at every RK4 stage and the contact slides along
/// the boundary in slip. Losing contact (including sliding off the pushed
/// edge of a square) stops the object and sets `separated`.
inline PushResult analytical_push(const PushInput& input, const ObjectParams& obj, double dt,
                                  const SimulationOptions& opt = {}) {
    validate_input(input);
    obj.validate();
    if (!(dt > 0.0)) throw InputError("dt must be > 0");
    if (!(opt.max_step > 0.0)) throw InputError("max_step must be > 0");

    PushResult res;
    const Boundary boundary(obj.shape);
    const double p0 = boundary.param_from_c(input.c);
    const ContactFrame f0 = boundary.frame(p0);
    const Eigen::Vector2d dir = Boundary::rotate(f0.normal, input.beta);
    const Eigen::Vector2d u_world = input.v_p * dir;

    if (std::abs(input.beta) >= 0.5 * std::numbers::pi) {
        res.separated = true;
        res.initial_mode = ContactMode::separate;
        return res;
    }
    res.initial_mode = quasi_static_twist(f0, dir, obj.ls_ratio_c, obj.mu_contact).mode;
    if (input.v_p == 0.0) return res;
    if (res.initial_mode == ContactMode::separate) {
        res.separated = true;
        return res;
    }

    // State: world pose (x, y, theta) and the boundary parameter of the contact.
    using State = Eigen::Vector4d;
    auto rhs = [&](const State& s, bool& separated) -> State {
        const ContactFrame f = boundary.frame(s(3));
        const Eigen::Vector2d u = Boundary::rotate(u_world, -s(2));
        const Twist tw = quasi_static_twist(f, u, obj.ls_ratio_c, obj.mu_contact);
        State d = State::Zero();
        if (tw.mode == ContactMode::separate) {
            separated = true;
            return d;
        }
        d.head<2>() = Boundary::rotate(tw.v, s(2));
        d(2) = tw.omega;
        if (tw.mode != ContactMode::stick) {
            const Eigen::Vector2d vc = tw.v + tw.omega * Eigen::Vector2d(-f.point.y(), f.point.x());
            d(3) = (u - vc).dot(f.tangent) / f.speed;
        }
        return d;
    };
    auto pusher_position = [&](const State& s) -> Eigen::Vector2d {
        return s.head<2>() + Boundary::rotate(boundary.frame(s(3)).point, s(2));
    };

    const int steps = std::max(1, static_cast<int>(std::ceil(dt / opt.max_step - 1e-9)));
    const double h = dt / steps;
    State s(0.0, 0.0, 0.0, p0);
    if (opt.record_trajectory) res.trajectory.push_back({0.0, pusher_position(s), s.head<3>()});
    Eigen::Vector2d pusher_at_separation = Eigen::Vector2d::Zero();
    double t_separation = 0.0;

    for (int i = 0; i < steps; ++i) {
        const double t = (i + 1) * h;
        if (!res.separated) {
            bool sep = false;
            const State k1 = rhs(s, sep);
            if (sep) {
                res.separated = true;
            } else {
                bool ignored = false;
                const State k2 = rhs(s + 0.5 * h * k1, ignored);
                const State k3 = rhs(s + 0.5 * h * k2, ignored);
                const State k4 = rhs(s + h * k3, ignored);
                const State next = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (boundary.in_contact_range(next(3))) {
                    s = next;
                } else {
                    res.separated = true;
                }
            }
            if (res.separated) {
                pusher_at_separation = pusher_position(s);
                t_separation = t - h;
            }
        }
        if (opt.record_trajectory) {
            const Eigen::Vector2d pusher =
                res.separated ? Eigen::Vector2d(pusher_at_separation + u_world * (t - t_separation))
                              : pusher_position(s);
            res.trajectory.push_back({t, pusher, s.head<3>()});
        }
    }

    const Eigen::Vector2d local = pusher_frame(s.head<2>(), dir);
    res.outcome = {local.x(), local.y(), s(2)};
    return res;
}

// ---------------------------------------------------------------------------
// Synthetic ground truth
// ---------------------------------------------------------------------------

/// Gaussian bump in (c, beta) space used by the noise amplification field.
struct NoiseBump {
    double c = 0.5;
    double beta = 0.0;
    double width_c = 0.15;
    double width_beta = 0.3;
    double amplitude = 1.0;
};

/// Input-dependent noise: std_k = base_std_k * amplification(c, beta) *
/// (v_p dt / reference_length), where amplification = 1 + sum of bumps.
struct NoiseField {
    std::array<double, kNumOutputs> base_std{0.0, 0.0, 0.0};
    std::vector<NoiseBump> bumps;
    double reference_length = 4.0;  // [mm] push length at which base_std applies

    static NoiseField none() { return {}; }

    /// Default field for the 90 mm square at 20 mm/s and 0.2 s windows. The
    /// three bumps (amplification up to ~4x) keep the noise std roughly
    /// between 10% and 40% of the mean magnitude over most of the grid.
    static NoiseField defaults() {
        NoiseField nf;
        nf.base_std = {0.22, 0.1, 0.003};
        nf.bumps = {
            {0.5, 0.0, 0.12, 0.25, 2.2},
            {0.15, -0.8, 0.12, 0.35, 2.99},
            {0.85, 0.8, 0.12, 0.35, 2.99},
        };
        return nf;
    }

    double amplification(double c, double beta) const {
        double a = 1.0;
        for (const NoiseBump& b : bumps) {
            const double zc = (c - b.c) / b.width_c;
            const double zb = (beta - b.beta) / b.width_beta;
            a += b.amplitude * std::exp(-0.5 * (zc * zc + zb * zb));
        }
        return a;
    }

    std::array<double, kNumOutputs> std_at(const PushInput& in, double dt) const {
        const double amp = amplification(in.c, in.beta) * (in.v_p * dt / reference_length);
        return {base_std[0] * amp, base_std[1] * amp, base_std[2] * amp};
    }
};

/// Non-quasi-static effect for constructed-dynamics studies: above
/// activation_speed the mean outcome is scaled by 1 + gain * (v - v_a) / v_a.
struct SpeedEffect {
    double activation_speed = std::numeric_limits<double>::infinity();
    double gain = 0.0;

    double factor(double v) const {
        if (!(v > activation_speed)) return 1.0;
        return 1.0 + gain * (v - activation_speed) / activation_speed;
    }
};

struct SamplingSpec {
    enum class Mode { random, grid };
    Mode mode = Mode::random;
    // random mode: independent uniform draws (or uniform choice among
    // v_values when that list is non-empty)
    double v_min = 20.0, v_max = 20.0;
    std::vector<double> v_values;
    double c_min = 0.0, c_max = 1.0;
    double beta_min = -1.5, beta_max = 1.5;
    // grid mode: cartesian product v x c x beta, each repeated `repetitions` times
    std::vector<double> grid_v{20.0};
    std::vector<double> grid_c;
    std::vector<double> grid_beta;
    int repetitions = 1;
    // Window scaling: when set, a sample at speed v covers dt * v_ref / v
    // seconds, so every push has the same length as a window of dt at v_ref.
    bool equal_length = false;
    double v_ref = 10.0;
};

struct SynthConfig {
    ObjectParams object;
    NoiseField noise = NoiseField::defaults();
    SpeedEffect speed_effect;
    SamplingSpec sampling;
    std::size_t n = 100;  // ignored in grid mode
    double dt = 0.2;
    std::uint64_t seed = 0;
    SimulationOptions sim;
    std::string object_name = "square";
    std::string surface_name = "synthetic";
};

struct SynthResult {
    PushDataset dataset;
    std::vector<PushOutcome> true_mean;
    std::vector<std::array<double, kNumOutputs>> true_std;
};

inline PushOutcome ground_truth_mean(const PushInput& in, const ObjectParams& obj, double dt, const SpeedEffect& fx,
                                     const SimulationOptions& sim = {}) {
    PushOutcome o = analytical_push(in, obj, dt, sim).outcome;
    const double k = fx.factor(in.v_p);
    o.dx *= k;
    o.dy *= k;
    o.dtheta *= k;
    return o;
}

inline std::vector<double> linspace_step(double lo, double hi, double step) {
    std::vector<double> v;
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    // Snapped to 1e-12 so grid values such as 0 and 0.3 come out exact.
    for (int i = 0; i <= n; ++i) v.push_back(std::round((lo + i * step) * 1e12) / 1e12);
    return v;
}

/// Draws a synthetic dataset: means from the analytical model (times the
/// optional speed effect) plus independent Gaussian noise from `noise`.
/// Deterministic given the seed.
inline SynthResult synth_generate(const SynthConfig& cfg) {
    cfg.object.validate();
    if (!(cfg.dt > 0.0)) throw InputError("synth: dt must be > 0");
    const SamplingSpec& sp = cfg.sampling;
    std::vector<std::pair<PushInput, std::optional<int>>> inputs;
    std::mt19937_64 rng(cfg.seed);

    if (sp.mode == SamplingSpec::Mode::grid) {
        if (sp.grid_v.empty() || sp.grid_c.empty() || sp.grid_beta.empty()) {
            throw InputError("synth: grid lists must be non-empty");
        }
        if (sp.repetitions < 1) throw InputError("synth: repetitions must be >= 1");
        for (double v : sp.grid_v)
            for (double c : sp.grid_c)
                for (double b : sp.grid_beta)
                    for (int r = 0; r < sp.repetitions; ++r)
                        inputs.push_back({PushInput{v, c, b},
                                          sp.repetitions > 1 ? std::optional<int>(r) : std::nullopt});
    } else {
        if (cfg.n < 1) throw InputError("synth: n must be >= 1");
        std::uniform_real_distribution<double> uv(sp.v_min, sp.v_max);
        std::uniform_real_distribution<double> uc(sp.c_min, sp.c_max);
        std::uniform_real_distribution<double> ub(sp.beta_min, sp.beta_max);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            double v;
            if (!sp.v_values.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, sp.v_values.size() - 1);
                v = sp.v_values[pick(rng)];
            } else {
                v = sp.v_min == sp.v_max ? sp.v_min : uv(rng);
            }
            const double c = uc(rng);
            const double b = ub(rng);
            inputs.push_back({PushInput{v, c, b}, std::nullopt});
        }
    }

    SynthResult out;
    out.dataset.dt = cfg.dt;
    out.dataset.provenance = "synthetic: " + cfg.object.shape.name() + ", seed " + std::to_string(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    PushInput last_in{-1.0, -1.0, -1.0};
    double last_dt = -1.0;
    PushOutcome mean_cache;
    for (const auto& [in, rep] : inputs) {
        validate_input(in);
        const double dt = sp.equal_length ? cfg.dt * sp.v_ref / in.v_p : cfg.dt;
        if (!(in == last_in) || dt != last_dt) {
            mean_cache = ground_truth_mean(in, cfg.object, dt, cfg.speed_effect, cfg.sim);
            last_in = in;
            last_dt = dt;
        }
        const auto sd = cfg.noise.std_at(in, dt);
        PushSample s;
        s.input = in;
        s.dt = dt;
        s.object = cfg.object_name;
        s.surface = cfg.surface_name;
        s.rep_id = rep;
        s.source = SampleSource::synthetic;
        for (std::size_t k = 0; k < kNumOutputs; ++k) s.outcome[k] = mean_cache[k] + sd[k] * gauss(rng);
        out.dataset.samples.push_back(s);
        out.true_mean.push_back(mean_cache);
        out.true_std.push_back(sd);
    }
    return out;
}

/// Positional form: object, noise field, sampling, count, window, seed.
inline SynthResult synth_generate(const ObjectParams& obj, const NoiseField& noise, const SamplingSpec& sampling,
                                  std::size_t n, double dt, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.object = obj;
    cfg.noise = noise;
    cfg.sampling = sampling;
    cfg.n = n;
    cfg.dt = dt;
    cfg.seed = seed;
    cfg.object_name = obj.shape.name();
    return synth_generate(cfg);
}

}  // namespace pushgp
