#include <cmath>
#include <limits>
#include <numbers>

#include <gtest/gtest.h>

#include "pushgp/pushmodel.hpp"

namespace pushgp {
namespace {

const ObjectParams kSquare{};

std::vector<double> grid_c() { return linspace_step(0.0, 1.0, 0.05); }
std::vector<double> grid_beta() { return linspace_step(-1.5, 1.5, 0.1); }

TEST(Shape, UniformPressureRatios) {
    // Mean distance to the centre of a unit square, by 2-D midpoint quadrature.
    constexpr int N = 1000;
    double s = 0.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) s += std::hypot((i + 0.5) / N - 0.5, (j + 0.5) / N - 0.5);
    EXPECT_NEAR(uniform_pressure_ls_ratio(Shape::square(1.0)), s / (N * N), 1e-6);
    EXPECT_NEAR(uniform_pressure_ls_ratio(Shape::circle(30.0)), 20.0, 1e-12);
    EXPECT_NEAR(Shape::ellipse(40.0, 40.0).perimeter(), 2.0 * std::numbers::pi * 40.0, 1e-9);
}

TEST(Boundary, EllipseParameterRoundTrip) {
    const Boundary b(Shape::ellipse(60.0, 35.0));
    for (double c = 0.0; c < 1.0; c += 0.037) EXPECT_NEAR(b.c_from_param(b.param_from_c(c)), c, 1e-12);
    // c = 0.25 is a quarter of the perimeter: the top of the ellipse by symmetry.
    EXPECT_NEAR(b.param_from_c(0.25), 0.5 * std::numbers::pi, 1e-9);
}

TEST(Boundary, InwardNormalPointsToCentroid) {
    for (const Shape& s : {Shape::circle(30.0), Shape::ellipse(60.0, 35.0)}) {
        const Boundary b(s);
        for (double c = 0.0; c < 1.0; c += 0.1) {
            const ContactFrame f = b.frame(b.param_from_c(c));
            EXPECT_LT(f.normal.dot(f.point), 0.0);
            EXPECT_NEAR(f.normal.dot(f.tangent), 0.0, 1e-14);
        }
    }
}

TEST(Boundary, LocateRecoversContact) {
    const Boundary sq(Shape::square(90.0));
    const Boundary::Location l = sq.locate(Eigen::Vector2d(10.0, 45.5));  // top edge
    EXPECT_NEAR(l.edge_angle, 1.5 * std::numbers::pi, 1e-12);
    EXPECT_NEAR(l.distance, 0.5, 1e-12);
    const Boundary el(Shape::ellipse(60.0, 35.0));
    const double p = el.param_from_c(0.3);
    const ContactFrame f = el.frame(p);
    const Boundary::Location le = el.locate(f.point - 0.2 * f.normal);
    EXPECT_NEAR(le.param, p, 1e-9);
}

TEST(PusherFrame, Rotations) {
    const Eigen::Vector2d d = Eigen::Vector2d(1.0, 2.0).normalized();
    const Eigen::Vector2d par = pusher_frame(3.0 * d, d);
    EXPECT_NEAR(par.x(), 3.0, 1e-14);
    EXPECT_NEAR(par.y(), 0.0, 1e-14);
    const Eigen::Vector2d left = pusher_frame(3.0 * Eigen::Vector2d(-d.y(), d.x()), d);
    EXPECT_NEAR(left.x(), 0.0, 1e-14);
    EXPECT_NEAR(left.y(), 3.0, 1e-14);
    const Eigen::Vector2d id = pusher_frame(Eigen::Vector2d(3, 4), Eigen::Vector2d(1, 0));
    EXPECT_EQ(id, Eigen::Vector2d(3, 4));
    EXPECT_THROW(pusher_frame(Eigen::Vector2d(1, 1), Eigen::Vector2d::Zero()), InputError);
}

TEST(MotionCone, Cases) {
    ObjectParams sticky = kSquare;
    sticky.mu_contact = std::numeric_limits<double>::infinity();
    ObjectParams slippery = kSquare;
    slippery.mu_contact = 0.0;
    for (double c : grid_c()) {
        for (double b : grid_beta()) {
            const PushInput in{20.0, c, b};
            const ContactMode m = motion_cone_mode(in, sticky);
            EXPECT_TRUE(m == ContactMode::stick || m == ContactMode::separate);
            if (std::abs(b) <= 1.0) EXPECT_EQ(m, ContactMode::stick) << c << " " << b;
            if (b != 0.0) EXPECT_NE(motion_cone_mode(in, slippery), ContactMode::stick);
        }
    }
    for (double mu : {1e-3, 0.1, 0.25, 2.0}) {
        ObjectParams o = kSquare;
        o.mu_contact = mu;
        EXPECT_EQ(motion_cone_mode({20.0, 0.5, 0.0}, o), ContactMode::stick);
    }
    EXPECT_EQ(motion_cone_mode({20.0, 0.5, 0.5 * std::numbers::pi}, kSquare), ContactMode::separate);
    // Pushing up along the edge far outside the cone slides the contact up.
    EXPECT_EQ(motion_cone_mode({20.0, 0.5, 1.4}, kSquare), ContactMode::slide_up);
    EXPECT_EQ(motion_cone_mode({20.0, 0.5, -1.4}, kSquare), ContactMode::slide_down);
}

TEST(AnalyticalPush, ZeroSpeedIsZeroOutcome) {
    for (double c : {0.0, 0.3, 1.0}) {
        const PushResult r = analytical_push({0.0, c, 0.4}, kSquare, 0.2);
        EXPECT_EQ(r.outcome, PushOutcome{});
        EXPECT_FALSE(r.separated);
    }
}

TEST(AnalyticalPush, CentreNormalPushIsStraight) {
    const PushResult r = analytical_push({20.0, 0.5, 0.0}, kSquare, 0.2);
    EXPECT_NEAR(r.outcome.dx, 4.0, 1e-12);
    EXPECT_EQ(r.outcome.dy, 0.0);
    EXPECT_EQ(r.outcome.dtheta, 0.0);
    EXPECT_EQ(r.initial_mode, ContactMode::stick);
}

TEST(AnalyticalPush, MirrorAntisymmetry) {
    for (double c : grid_c()) {
        for (double b : grid_beta()) {
            const PushOutcome o = analytical_push({20.0, c, b}, kSquare, 0.2).outcome;
            const PushOutcome m = analytical_push({20.0, 1.0 - c, -b}, kSquare, 0.2).outcome;
            EXPECT_NEAR(o.dx, m.dx, 1e-9) << c << " " << b;
            EXPECT_NEAR(o.dy, -m.dy, 1e-9) << c << " " << b;
            EXPECT_NEAR(o.dtheta, -m.dtheta, 1e-9) << c << " " << b;
        }
    }
}

TEST(AnalyticalPush, CircleIndependentOfContactPoint) {
    const ObjectParams circle = ObjectParams::uniform_pressure(Shape::circle(40.0));
    for (double b : {-1.2, -0.4, 0.0, 0.7, 1.3}) {
        const PushOutcome ref = analytical_push({30.0, 0.0, b}, circle, 0.2).outcome;
        for (double c = 0.05; c <= 1.0; c += 0.05) {
            const PushOutcome o = analytical_push({30.0, c, b}, circle, 0.2).outcome;
            EXPECT_NEAR(o.dx, ref.dx, 1e-9);
            EXPECT_NEAR(o.dy, ref.dy, 1e-9);
            EXPECT_NEAR(o.dtheta, ref.dtheta, 1e-9);
        }
    }
}

TEST(AnalyticalPush, QuasiStaticSpeedBound) {
    for (const ObjectParams& obj : {kSquare, ObjectParams::uniform_pressure(Shape::ellipse(60.0, 35.0))}) {
        for (double c : grid_c()) {
            for (double b : grid_beta()) {
                const PushOutcome o = analytical_push({20.0, c, b}, obj, 0.2).outcome;
                EXPECT_TRUE(o.finite());
                EXPECT_LE(std::hypot(o.dx, o.dy), 20.0 * 0.2 + 1e-12) << c << " " << b;
            }
        }
    }
}

TEST(AnalyticalPush, SubStepRefinementConverges) {
    SimulationOptions coarse;
    SimulationOptions fine;
    fine.max_step = 0.5e-3;
    for (double v : {20.0, 100.0}) {
        for (double c : {0.0, 0.15, 0.5, 0.8}) {
            for (double b : {-1.2, -0.3, 0.0, 0.6, 1.5}) {
                const PushResult a = analytical_push({v, c, b}, kSquare, 0.2, coarse);
                const PushResult f = analytical_push({v, c, b}, kSquare, 0.2, fine);
                if (a.separated != f.separated) continue;  // edge departure straddles a step
                EXPECT_LT(std::abs(a.outcome.dx - f.outcome.dx), 1e-4);
                EXPECT_LT(std::abs(a.outcome.dy - f.outcome.dy), 1e-4);
                EXPECT_LT(std::abs(a.outcome.dtheta - f.outcome.dtheta), 1e-6);
            }
        }
    }
}

TEST(AnalyticalPush, ArgmaxLocations) {
    double best_dx = -1.0, best_dx_c = -1.0, best_dx_b = 0.0;
    double best_th = -1.0, best_th_c = -1.0;
    for (double c : grid_c()) {
        for (double b : grid_beta()) {
            const PushOutcome o = analytical_push({20.0, c, b}, kSquare, 0.2).outcome;
            if (std::abs(o.dx) > best_dx + 1e-12) best_dx = std::abs(o.dx), best_dx_c = c, best_dx_b = b;
            if (std::abs(o.dtheta) > best_th + 1e-12) best_th = std::abs(o.dtheta), best_th_c = c;
        }
    }
    EXPECT_NEAR(best_dx_c, 0.5, 1e-9);
    EXPECT_NEAR(best_dx_b, 0.0, 1e-9);
    // Rotation peaks in the outer part of the edge; along the normal push it
    // peaks at the vertices.
    EXPECT_GE(std::abs(best_th_c - 0.5), 0.3 - 1e-9);
    double edge_th = 0.0, edge_c = -1.0;
    for (double c : grid_c()) {
        const double th = std::abs(analytical_push({20.0, c, 0.0}, kSquare, 0.2).outcome.dtheta);
        if (th > edge_th + 1e-12) edge_th = th, edge_c = c;
    }
    EXPECT_TRUE(edge_c == 0.0 || edge_c == 1.0);
    EXPECT_GT(edge_th, 0.95 * best_th);
}

TEST(AnalyticalPush, SeparationIsFlaggedZero) {
    const PushResult r = analytical_push({20.0, 0.5, 1.6}, kSquare, 0.2);
    EXPECT_TRUE(r.separated);
    EXPECT_EQ(r.outcome, PushOutcome{});
    EXPECT_THROW(analytical_push({20.0, 1.5, 0.0}, kSquare, 0.2), InputError);
    EXPECT_THROW(analytical_push({-1.0, 0.5, 0.0}, kSquare, 0.2), InputError);
    EXPECT_THROW(analytical_push({20.0, 0.5, 0.0}, kSquare, 0.0), InputError);
}

TEST(AnalyticalPush, TrajectoryPusherFollowsStraightLine) {
    SimulationOptions opt;
    opt.record_trajectory = true;
    const PushResult r = analytical_push({20.0, 0.2, 0.5}, kSquare, 0.2, opt);
    ASSERT_EQ(r.trajectory.size(), 201u);
    const Eigen::Vector2d start = r.trajectory.front().pusher;
    const Eigen::Vector2d dir = Boundary::rotate(Eigen::Vector2d(1, 0), 0.5);
    for (const TrajectoryPoint& p : r.trajectory) {
        EXPECT_LT((p.pusher - start - 20.0 * p.t * dir).norm(), 1e-9);
    }
}

TEST(Synth, NoiselessEqualsAnalytical) {
    SynthConfig cfg;
    cfg.noise = NoiseField::none();
    cfg.n = 40;
    cfg.seed = 3;
    const SynthResult s = synth_generate(cfg);
    ASSERT_EQ(s.dataset.size(), 40u);
    for (const PushSample& p : s.dataset.samples) {
        EXPECT_EQ(p.outcome, analytical_push(p.input, cfg.object, 0.2).outcome);
    }
}

TEST(Synth, SameSeedBitwiseIdentical) {
    SynthConfig cfg;
    cfg.n = 50;
    cfg.seed = 11;
    const SynthResult a = synth_generate(cfg);
    const SynthResult b = synth_generate(cfg);
    for (std::size_t i = 0; i < a.dataset.size(); ++i) {
        EXPECT_EQ(a.dataset.samples[i].input, b.dataset.samples[i].input);
        EXPECT_EQ(a.dataset.samples[i].outcome, b.dataset.samples[i].outcome);
    }
    cfg.seed = 12;
    EXPECT_NE(synth_generate(cfg).dataset.samples[0].outcome, a.dataset.samples[0].outcome);
}

TEST(Synth, LawOfLargeNumbersAtFixedInput) {
    SynthConfig cfg;
    cfg.sampling.mode = SamplingSpec::Mode::grid;
    cfg.sampling.grid_v = {20.0};
    cfg.sampling.grid_c = {0.3};
    cfg.sampling.grid_beta = {0.4};
    cfg.sampling.repetitions = 10000;
    cfg.seed = 5;
    const SynthResult s = synth_generate(cfg);
    const PushOutcome truth = analytical_push({20.0, 0.3, 0.4}, cfg.object, 0.2).outcome;
    const auto sd = cfg.noise.std_at({20.0, 0.3, 0.4}, 0.2);
    const double n = 10000.0;
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        double m = 0.0, m2 = 0.0;
        for (const PushSample& p : s.dataset.samples) m += p.outcome[k];
        m /= n;
        for (const PushSample& p : s.dataset.samples) m2 += (p.outcome[k] - m) * (p.outcome[k] - m);
        const double std = std::sqrt(m2 / (n - 1.0));
        EXPECT_LT(std::abs(m - truth[k]), 4.0 * sd[k] / std::sqrt(n));
        EXPECT_NEAR(std / sd[k], 1.0, 0.05);
    }
    EXPECT_EQ(s.dataset.samples.back().rep_id, 9999);
}

TEST(Synth, DefaultNoiseIsPositiveAndBounded) {
    const NoiseField nf = NoiseField::defaults();
    double max_amp = 0.0;
    for (double c : grid_c())
        for (double b : grid_beta()) {
            const double a = nf.amplification(c, b);
            EXPECT_GE(a, 1.0);
            max_amp = std::max(max_amp, a);
            for (double s : nf.std_at({20.0, c, b}, 0.2)) EXPECT_GT(s, 0.0);
        }
    EXPECT_LE(max_amp, 4.0 + 1e-9);
}

TEST(Synth, EqualLengthScalesWindow) {
    SynthConfig cfg;
    cfg.noise = NoiseField::none();
    cfg.sampling.mode = SamplingSpec::Mode::grid;
    cfg.sampling.grid_v = {10.0, 40.0};
    cfg.sampling.grid_c = {0.3};
    cfg.sampling.grid_beta = {0.2};
    cfg.sampling.equal_length = true;
    const SynthResult s = synth_generate(cfg);
    EXPECT_DOUBLE_EQ(s.dataset.samples[0].dt, 0.2);
    EXPECT_DOUBLE_EQ(s.dataset.samples[1].dt, 0.05);
    // Quasi-static outcomes depend only on push length.
    EXPECT_NEAR(s.dataset.samples[0].outcome.dx, s.dataset.samples[1].outcome.dx, 1e-6);
}

TEST(Synth, SpeedEffectScalesAboveActivation) {
    SpeedEffect fx{60.0, 0.5};
    EXPECT_EQ(fx.factor(40.0), 1.0);
    EXPECT_DOUBLE_EQ(fx.factor(120.0), 1.5);
    const PushOutcome base = ground_truth_mean({120.0, 0.4, 0.1}, kSquare, 0.2, SpeedEffect{});
    const PushOutcome fast = ground_truth_mean({120.0, 0.4, 0.1}, kSquare, 0.2, fx);
    EXPECT_NEAR(fast.dx, 1.5 * base.dx, 1e-12);
}

}  // namespace
}  // namespace pushgp
