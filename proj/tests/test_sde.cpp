#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cvfl/sde.hpp"

using namespace cvfl;
using std::numbers::pi;

namespace {

TrajectoryRecord record_with(std::vector<double> x, std::uint64_t id = 0) {
    TrajectoryRecord r;
    r.stream_id = id;
    for (std::size_t i = 0; i < x.size(); ++i) r.t.push_back(0.1 * static_cast<double>(i));
    r.p.assign(x.size(), 0.0);
    r.x = std::move(x);
    return r;
}

double max_z(const EnsembleStats& s, const SampledPath<2>& ref, double dt) {
    double z = 0.0;
    for (std::size_t j = 1; j < s.t.size(); ++j) {
        const auto i = static_cast<std::size_t>(std::llround(s.t[j] / dt));
        z = std::max({z, std::abs(s.mean_x[j] - ref.y[i][0]) / s.sem_x[j],
                      std::abs(s.mean_p[j] - ref.y[i][1]) / s.sem_p[j]});
    }
    return z;
}

}  // namespace

TEST_SUITE("sde") {

TEST_CASE("record increment") {
    OscillatorParams o;
    MeasurementParams m;
    CHECK(measurement_increment(0.3, m, o, 0.01, 0.0) == doctest::Approx(0.003));
    m.gamma = 2.0;
    m.eta = 0.5;
    CHECK(measurement_increment(0.3, m, o, 0.01, 0.1) ==
          doctest::Approx(0.003 + 0.0707107).epsilon(1e-6));
    MeasurementParams c;
    c.mode = MeasurementMode::classical;
    c.sigma = 1.0;
    c.gamma = 2.0;
    CHECK(measurement_increment(0.3, c, o, 0.01, 0.1) == doctest::Approx(0.003 + 0.05));
    MeasurementParams off;
    off.gamma = 0.0;
    CHECK_THROWS_AS(measurement_increment(0.3, off, o, 0.01, 0.1), Error);
}

TEST_CASE("scheme I step") {
    OscillatorParams o;
    MeasurementParams m;
    const MeanState s{0.8, -0.4};
    const CovState cv{0.45, 0.6, 0.05};
    const double dt = 1e-3;

    auto n = step_scheme1(s, cv, o, m, 0.2, 0.0, 0.0, 0.1, dt);
    const auto d = scheme1_mean_rhs(s, 0.1, o, 0.2);
    CHECK(n.x == doctest::Approx(s.x + d[0] * dt));
    CHECK(n.p == doctest::Approx(s.p + d[1] * dt));

    // k = 0: only back-action on x; the delayed increment does nothing.
    const auto a = step_scheme1(s, cv, o, m, 0.0, 0.05, 0.3, 0.1, dt);
    const auto b = step_scheme1(s, cv, o, m, 0.0, 0.05, -0.7, 0.1, dt);
    CHECK(a.x == b.x);
    const auto f = free_mean_rhs(s, o);
    CHECK(a.x == doctest::Approx(s.x + f[0] * dt + std::sqrt(2.0) * 0.45 * 0.05));
    CHECK(a.p == doctest::Approx(s.p + f[1] * dt + std::sqrt(2.0) * 0.05 * 0.05));

    // Feedback noise uses dW - dW_tau.
    const auto e = step_scheme1(s, cv, o, m, 0.2, 0.05, 0.05, 0.1, dt);
    const auto g = step_scheme1(s, cv, o, m, 0.2, 0.05, 0.0, 0.1, dt);
    CHECK(e.x - g.x == doctest::Approx(-0.2 * std::sqrt(0.5) * 0.05));

    MeasurementParams off;
    off.gamma = 0.0;
    CHECK_THROWS_AS(step_scheme1(s, cv, o, off, 0.2, 0.0, 0.0, 0.0, dt), Error);
}

TEST_CASE("scheme II step") {
    OscillatorParams o;
    MeasurementParams m;
    FeedbackConfig fb;
    fb.scheme = Scheme::scheme2;
    fb.k = 0.1;
    const MeanState s{0.3, 0.2};
    const CovState cv{0.5, 0.5, 0.0};
    const double dt = 1e-3;

    const auto n = step_scheme2(s, cv, o, m, fb, 0.7, 0.0, dt);
    const auto d = scheme2_mean_rhs(s, 0.7, o, fb);
    CHECK(n.x == doctest::Approx(s.x + d[0] * dt));
    CHECK(n.p == doctest::Approx(s.p + d[1] * dt));

    const auto w = step_scheme2(s, cv, o, m, fb, 0.7, 1.0, dt);
    CHECK(w.x - n.x == doctest::Approx(0.777817).epsilon(1e-6));

    MeasurementParams off;
    off.gamma = 0.0;
    CHECK_THROWS_AS(step_scheme2(s, cv, o, off, fb, 0.0, 0.0, dt), Error);
    fb.scheme = Scheme::none;
    CHECK_NOTHROW(step_scheme2(s, cv, o, off, fb, 0.0, 0.0, dt));
}

TEST_CASE("step defaults and delay alignment") {
    FeedbackConfig fb;
    fb.scheme = Scheme::scheme1;
    fb.tau = pi;
    const double dt = default_sde_step(fb, 1.0);
    CHECK(dt <= pi / 256.0);
    CHECK(dt <= 2 * pi / 2048.0 * (1 + 1e-12));
    CHECK_NOTHROW(delay_steps(pi, dt));
    fb.tau = 1.0;
    CHECK_NOTHROW(delay_steps(1.0, default_sde_step(fb, 1.0)));
    fb.scheme = Scheme::scheme2;
    CHECK(default_sde_step(fb, 2.0) == doctest::Approx(pi / 2048.0));
}

TEST_CASE("trajectories are reproducible and worker-independent") {
    SdeConfig cfg;
    cfg.fb.scheme = Scheme::scheme1;
    cfg.fb.k = 0.1;
    cfg.t_end = 5.0;
    cfg.record_stride = 16;
    const auto cov = precompute_covariances(cfg);
    const auto a = run_trajectory(cfg, cov, 11, 4);
    const auto b = run_trajectory(cfg, cov, 11, 4);
    CHECK(a.x == b.x);
    CHECK(a.p == b.p);
    CHECK(a.dI == b.dI);
    CHECK(a.x != run_trajectory(cfg, cov, 11, 5).x);
    CHECK(a.t.back() == doctest::Approx(cfg.steps() * cfg.step()));

    const auto one = run_ensemble(cfg, cov, 3, 12, 1);
    const auto three = run_ensemble(cfg, cov, 3, 12, 3);
    REQUIRE(one.size() == three.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].stream_id == i);
        CHECK(one[i].x == three[i].x);
    }
}

TEST_CASE("ensemble statistics arithmetic") {
    std::vector<TrajectoryRecord> same{record_with({1.0, 2.0}, 0), record_with({1.0, 2.0}, 1)};
    auto s = ensemble_stats(same);
    CHECK(s.var_x[1] == 0.0);
    CHECK(s.mean_x[1] == 2.0);

    std::vector<TrajectoryRecord> pm{record_with({0.0, 1.0}, 1), record_with({0.0, -1.0}, 0)};
    s = ensemble_stats(pm);
    CHECK(s.mean_x[1] == 0.0);
    CHECK(s.var_x[1] == 2.0);
    CHECK(s.sem_x[1] == 1.0);
    CHECK(s.n == 2);

    std::vector<TrajectoryRecord> ragged{record_with({0.0, 1.0}, 0), record_with({0.0}, 1)};
    CHECK_THROWS_AS(ensemble_stats(ragged), Error);
    CHECK_THROWS_AS(ensemble_stats({}), Error);
}

TEST_CASE("measured oscillator without feedback decays like the free mean") {
    SdeConfig cfg;
    cfg.osc.kappa = 0.3;
    cfg.meas.gamma = 0.5;
    cfg.t_end = 8.0;
    cfg.record_stride = 64;
    const auto cov = precompute_covariances(cfg);
    const auto s = ensemble_stats(run_ensemble(cfg, cov, 99, 500));
    for (std::size_t j = 1; j < s.t.size(); ++j) {
        const double t = s.t[j], env = std::exp(-0.15 * t);
        CHECK(std::abs(s.mean_x[j] - env * std::cos(t)) < 4.0 * s.sem_x[j]);
        CHECK(std::abs(s.mean_p[j] + env * std::sin(t)) < 4.0 * s.sem_p[j]);
    }
}

TEST_CASE("ensemble error shrinks as 1/sqrt(N)") {
    SdeConfig cfg;
    cfg.osc.kappa = 0.25;
    cfg.meas.gamma = 0.5;
    cfg.fb.scheme = Scheme::scheme2;
    cfg.fb.k = 0.125;
    cfg.initial = {0.5, 0.5};
    cfg.t_end = 6.0;
    cfg.record_stride = 128;
    const auto cov = precompute_covariances(cfg);
    const double dt = cfg.step();
    const auto ref = averaged_scheme2_path(cfg.osc, cfg.fb, cfg.initial,
                                           cfg.steps() * dt, dt);
    const auto small = ensemble_stats(run_ensemble(cfg, cov, 5, 500));
    const auto large = ensemble_stats(run_ensemble(cfg, cov, 6, 2000));
    CHECK(max_z(small, ref, dt) < 3.5);
    CHECK(max_z(large, ref, dt) < 3.5);
    const std::size_t j = small.t.size() - 1;
    CHECK(small.sem_x[j] / large.sem_x[j] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("conditional covariances and the uncertainty monitor") {
    SdeConfig cfg;
    cfg.meas.gamma = 0.8;
    cfg.meas.eta = 0.5;
    cfg.t_end = 10.0;
    const auto cov = precompute_covariances(cfg);
    CHECK(cov.cov.size() == cfg.steps() + 1);
    CHECK(cov.uncertainty_ok);
    CHECK(cov.min_uncertainty >= 0.25 * (1 - 1e-6));

    // Feedback settings do not enter the covariances.
    SdeConfig other = cfg;
    other.fb.scheme = Scheme::scheme2;
    other.fb.k = 0.3;
    other.fb.reference.y0 = -5.0;
    const auto cov2 = precompute_covariances(other);
    for (std::size_t i = 0; i < cov.cov.size(); i += 101) {
        CHECK(cov.cov[i].v_x == cov2.cov[i].v_x);
        CHECK(cov.cov[i].c == cov2.cov[i].c);
    }

    // A state below the bound is reported, not clipped.
    SdeConfig squeezed = cfg;
    squeezed.initial_cov = {0.1, 0.1, 0.0};
    const auto sq = precompute_covariances(squeezed);
    CHECK_FALSE(sq.uncertainty_ok);
    CHECK(sq.cov[0].v_x == 0.1);
}

TEST_CASE("delayed increments are uncorrelated with current ones") {
    SdeConfig cfg;
    cfg.fb.scheme = Scheme::scheme1;
    cfg.fb.k = 0.05;
    cfg.t_end = 20.0;
    cfg.record_stride = 256;
    const auto cov = precompute_covariances(cfg);
    const auto rec = run_ensemble(cfg, cov, 1234, 50);
    std::size_t pairs = 0;
    const double c = pooled_noise_correlation(rec, &pairs);
    CHECK(pairs == 50 * (cfg.steps() - cfg.lag_steps()));
    CHECK(std::abs(c) <= 4.0 / std::sqrt(static_cast<double>(pairs)));
}

TEST_CASE("scheme I ensemble mean grows above the critical gain and decays below") {
    auto amplitude_growth = [](double k) {
        SdeConfig cfg;
        cfg.fb.scheme = Scheme::scheme1;
        cfg.fb.k = k;
        cfg.t_end = 20.0;
        cfg.record_stride = 8;
        const auto cov = precompute_covariances(cfg);
        const auto s = ensemble_stats(run_ensemble(cfg, cov, 77, 200));
        auto amp = [&](double t0, double t1) {
            double a = 0.0;
            for (std::size_t j = 0; j < s.t.size(); ++j)
                if (s.t[j] >= t0 && s.t[j] <= t1)
                    a = std::max(a, std::hypot(s.mean_x[j], s.mean_p[j]));
            return a;
        };
        return amp(20.0 - pi, 20.0) / amp(10.0 - pi, 10.0);
    };
    CHECK(amplitude_growth(0.2) > 1.0);
    CHECK(amplitude_growth(0.02) < 1.0);
}

}  // TEST_SUITE
