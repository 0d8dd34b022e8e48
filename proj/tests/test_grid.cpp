#include <doctest.h>

#include <cmath>

#include "cvfl/classical.hpp"
#include "cvfl/grid.hpp"
#include "cvfl/moments.hpp"

using namespace cvfl;

namespace {

FpeCoefficients rotation(double omega) {
    FpeCoefficients co;
    co.a_xp = omega;
    co.a_px = -omega;
    return co;
}

void run(GridField& f, const FpeCoefficients& co, double t_end) {
    const auto n = static_cast<std::size_t>(std::ceil(t_end / (0.9 * max_stable_step(f.spec, co))));
    const double h = t_end / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) fpe_step(f, co, h);
}

double second_moment_x(const GridField& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.spec.nx; ++i)
        for (std::size_t j = 0; j < f.spec.np; ++j) s += f.spec.x(i) * f.spec.x(i) * f.at(i, j);
    return s * f.spec.hx() * f.spec.hp();
}

}  // namespace

TEST_SUITE("grid") {

TEST_CASE("coefficient tables") {
    OscillatorParams o;
    o.kappa = 0.1;
    MeasurementParams off;
    off.gamma = 0.0;
    auto c = coefficients_for(MeasurementMode::quantum, o, off, {}).base;
    CHECK(c.d_xx == doctest::Approx(0.05));
    CHECK(c.d_pp == doctest::Approx(0.05));
    CHECK(c.a_xx == doctest::Approx(-0.05));
    CHECK(c.a_xp == 1.0);

    o.kappa = 0.0;
    MeasurementParams m;
    m.gamma = 0.2;
    FeedbackConfig fb;
    fb.scheme = Scheme::scheme2;
    fb.k = 0.1;
    const auto model = coefficients_for(MeasurementMode::quantum, o, m, fb);
    CHECK(model.base.d_xx == doctest::Approx(0.025));
    CHECK(model.base.d_pp == doctest::Approx(0.1));
    CHECK(model.base.a_xx == doctest::Approx(0.1));
    // b_x carries -k x*(t)
    CHECK(model.at(0.0).b_x == doctest::Approx(0.1 * 2.0));

    // Quantum tables with eta = hbar / sigma approach k^2 sigma / (2 gamma) as hbar -> 0.
    o.kappa = 0.1;
    o.beta = 1.0;
    const double sigma = 0.7;
    for (double hbar : {0.1, 1e-3, 1e-6}) {
        o.hbar = hbar;
        MeasurementParams q;
        q.gamma = 0.2;
        q.eta = hbar / sigma;
        const auto t = coefficients_for(MeasurementMode::quantum, o, q, fb).base;
        const double feedback = 0.01 * sigma / 0.4;
        const double thermal = 0.1 * hbar * (1 + 2 * o.n_bose()) / 2;
        CHECK(t.d_xx - thermal == doctest::Approx(feedback));
        if (hbar < 1e-5) CHECK(thermal == doctest::Approx(0.1).epsilon(1e-5));
    }

    MeasurementParams cl = to_classical(m, sigma);
    o.hbar = 1.0;
    const auto t = coefficients_for(MeasurementMode::classical, o, cl, fb).base;
    CHECK(t.d_xx == doctest::Approx(0.1 + 0.01 * sigma / 0.4));
    CHECK(t.d_pp == doctest::Approx(0.1));

    CHECK_THROWS_AS(coefficients_for(MeasurementMode::quantum, o, off, fb), Error);
}

TEST_CASE("gaussian moments") {
    const auto spec = GridSpec::centered(256, 6.0);
    const auto f = gaussian_field(spec, 0.0, 0.0, 0.5, 0.5, 0.0);
    const auto m = moments(f);
    CHECK(m.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m.mean_x) < 1e-12);
    CHECK(m.v_x == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(m.v_p == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(std::abs(m.c) < 1e-12);
    CHECK(m.max_third_cumulant() < 1e-4);

    const auto g = gaussian_field(spec, 0.7, -0.4, 0.5, 0.5, 0.0);
    const auto n = moments(g);
    CHECK(n.mean_x == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(n.mean_p == doctest::Approx(-0.4).epsilon(1e-6));
    CHECK(n.v_x == doctest::Approx(m.v_x).epsilon(1e-6));
    CHECK(n.v_p == doctest::Approx(m.v_p).epsilon(1e-6));

    const auto h = gaussian_field(spec, 0.2, 0.1, 0.8, 0.4, 0.3);
    const auto q = moments(h);
    CHECK(q.c == doctest::Approx(0.3).epsilon(1e-4));
    CHECK(q.max_third_cumulant() < 1e-4);

    GridField bad = f;
    for (auto& v : bad.w) v *= 1.01;
    CHECK_THROWS_AS(moments(bad), Error);
    GridField zero(spec);
    CHECK_THROWS_AS(zero.renormalize(), Error);
}

TEST_CASE("pure rotation") {
    const auto spec = GridSpec::centered(128, 6.0);
    auto f = gaussian_field(spec, 2.0, 0.0, 0.5, 0.5, 0.0);
    const double t = 0.5;
    run(f, rotation(1.0), t);
    const auto m = moments(f);
    CHECK(m.mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.mean_x == doctest::Approx(2.0 * std::cos(t)).epsilon(2e-3));
    CHECK(m.mean_p == doctest::Approx(-2.0 * std::sin(t)).epsilon(2e-3));
}

TEST_CASE("classical equilibrium is stationary") {
    OscillatorParams o;
    o.kappa = 0.1;
    o.beta = 1.0;
    const auto co = classical_free_coefficients(o);
    CHECK(co.d_xx == doctest::Approx(0.1));
    CHECK(co.d_pp == doctest::Approx(0.1));

    const auto spec = GridSpec::centered(256, 6.0);
    auto f = gaussian_field(spec, 0.0, 0.0, 1.0, 1.0, 0.0);
    const auto m0 = moments(f);
    const double T = 2.0;
    run(f, co, T);
    const auto m1 = moments(f);
    const double drift = std::max({std::abs(m1.v_x - m0.v_x), std::abs(m1.v_p - m0.v_p),
                                   std::abs(m1.c - m0.c), std::abs(m1.mean_x - m0.mean_x)}) /
                         T;
    CHECK(drift <= 1e-4);

    o.kappa = 0.0;
    const auto still = classical_free_coefficients(o);
    CHECK(still.d_xx == 0.0);
    CHECK(still.a_xx == 0.0);
}

TEST_CASE("quantum free evolution tracks the moment equations") {
    OscillatorParams o;
    o.kappa = 0.2;
    MeasurementParams m;
    m.gamma = 0.3;
    const auto spec = GridSpec::centered(192, 6.0);

    for (bool measured : {false, true}) {
        MeasurementParams mm = m;
        if (!measured) mm.gamma = 0.0;
        GridRunConfig cfg;
        cfg.osc = o;
        cfg.meas = mm;
        cfg.spec = spec;
        cfg.conditional = false;
        GridEvolver ev(cfg, gaussian_field(spec, 1.5, -0.5, 0.5, 0.5, 0.0));
        const double t_end = 3.0;
        while (ev.time() < t_end - 1e-12) ev.step();
        const auto g = moments(ev.field());

        const double t = ev.time();
        auto mean = averaged_scheme2_path(o, {}, {1.5, -0.5}, t, t / 400).back();
        auto rhs = [&](double, const StateVec<3>& y) {
            return unconditional_cov_rhs_scheme2(CovState::from(y), o, mm, 0.0);
        };
        auto cov = integrate_ode<3>(rhs, {0.5, 0.5, 0.0}, 0.0, t, t / 400).back();
        CHECK(g.mean_x == doctest::Approx(mean[0]).epsilon(2e-3));
        CHECK(g.mean_p == doctest::Approx(mean[1]).epsilon(2e-3));
        CHECK(g.v_x == doctest::Approx(cov[0]).epsilon(3e-3));
        CHECK(g.v_p == doctest::Approx(cov[1]).epsilon(3e-3));
        CHECK(g.c == doctest::Approx(cov[2]).epsilon(3e-3));
        if (measured) CHECK(cov[1] > 0.5 + 0.05);  // decoherence heats p
        CHECK(ev.max_mass_defect() <= 1e-6);
        CHECK(ev.clamped_cells() == 0);
    }
}

TEST_CASE("measurement update") {
    const auto spec = GridSpec::centered(128, 6.0);
    const auto f0 = gaussian_field(spec, 0.3, 0.0, 0.5, 0.5, 0.0);
    GridField f = f0;
    measurement_update(f, 0.0, 1.4);
    CHECK(f.w == f0.w);

    measurement_update(f, 0.05, 1.4);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-13));

    // Gaussian-closure update of the mean: amplitude * Vx * dW.
    const double vx = moments(f0).v_x;
    const double mx0 = moments(f0).mean_x;
    CHECK(moments(f).mean_x - mx0 == doctest::Approx(1.4 * vx * 0.05).epsilon(1e-6));

    GridField g = f0;
    for (int i = 0; i < 20; ++i) {
        measurement_update(g, 0.01, 1.4);
        g.renormalize();
    }
    CHECK(moments(g).mean_x > mx0 + 0.05);
}

TEST_CASE("feedback translation") {
    const auto spec = GridSpec::centered(256, 6.0);
    const auto f0 = gaussian_field(spec, 0.0, 0.2, 0.5, 0.5, 0.1);
    GridField f = f0;
    feedback_noise_update(f, 0.0, 0.3);
    CHECK(f.w == f0.w);
    // Scheme I feeds back dW - dW_tau; equal increments cancel.
    const double dW = 0.02;
    feedback_noise_update(f, dW - dW, 0.3);
    CHECK(f.w == f0.w);

    feedback_noise_update(f, dW, 0.3);
    const auto a = moments(f0), b = moments(f);
    CHECK(b.mean_x - a.mean_x == doctest::Approx(0.3 * dW).epsilon(1e-4));
    CHECK(std::abs(b.v_x - a.v_x) < 5.0 * (0.3 * dW) * (0.3 * dW));
    CHECK(b.mean_p == doctest::Approx(a.mean_p).epsilon(1e-10));
}

TEST_CASE("averaging the classical measurement update recovers the deterministic field") {
    OscillatorParams o;
    o.kappa = 0.3;
    o.beta = 2.0;
    MeasurementParams m = to_classical(MeasurementParams{}, 1.0);
    m.gamma = 0.5;
    const auto spec = GridSpec::centered(64, 6.0);
    const auto init = gaussian_field(spec, 1.0, 0.0, 0.6, 0.6, 0.0);

    GridRunConfig cfg;
    cfg.osc = o;
    cfg.meas = m;
    cfg.spec = spec;
    cfg.conditional = false;
    GridEvolver det(cfg, init);
    const std::size_t steps = 60;
    for (std::size_t i = 0; i < steps; ++i) det.step();
    const double target_mx = moments(det.field()).mean_x;
    const double target_x2 = second_moment_x(det.field());

    cfg.conditional = true;
    cfg.dt = det.dt();
    const int n = 300;
    double s = 0.0, s2 = 0.0, q = 0.0, q2 = 0.0;
    for (int r = 0; r < n; ++r) {
        GridEvolver ev(cfg, init);
        NoiseStream noise(8, static_cast<std::uint64_t>(r), ev.dt());
        for (std::size_t i = 0; i < steps; ++i) ev.step(noise.next().dW);
        const double mx = moments(ev.field()).mean_x, x2 = second_moment_x(ev.field());
        s += mx;
        s2 += mx * mx;
        q += x2;
        q2 += x2 * x2;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
    const double mq = q / n, seq = std::sqrt((q2 / n - mq * mq) / (n - 1));
    CHECK(std::abs(mean - target_mx) < 4.0 * se + 1e-4);
    CHECK(std::abs(mq - target_x2) < 4.0 * seq + 1e-4);
}

TEST_CASE("step size guard and option parsing") {
    const auto spec = GridSpec::centered(64, 6.0);
    auto f = gaussian_field(spec, 0.0, 0.0, 0.5, 0.5, 0.0);
    const auto co = rotation(1.0);
    CHECK_THROWS_AS(fpe_step(f, co, 10.0 * max_stable_step(spec, co)), Error);
    CHECK(parse_advection("upwind1") == Advection::upwind1);
    CHECK(parse_advection("muscl") == Advection::muscl);
    CHECK(parse_stochastic_scheme("euler") == StochasticScheme::euler);
    CHECK_THROWS_AS(parse_advection("weno"), Error);
    CHECK_THROWS_AS(parse_stochastic_scheme("rk"), Error);
}

TEST_CASE("conditional evolution keeps mass every step") {
    OscillatorParams o;
    o.kappa = 0.25;
    MeasurementParams m;
    m.gamma = 0.5;
    FeedbackConfig fb;
    fb.scheme = Scheme::scheme2;
    fb.k = 0.125;
    GridRunConfig cfg;
    cfg.osc = o;
    cfg.meas = m;
    cfg.fb = fb;
    cfg.spec = GridSpec::centered(96, 8.0);
    GridEvolver ev(cfg, gaussian_field(cfg.spec, 0.5, 0.5, 0.5, 0.5, 0.0));
    NoiseStream noise(1, 0, ev.dt());
    for (int i = 0; i < 200; ++i) {
        ev.step(noise.next().dW);
        CHECK(ev.field().mass() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(ev.max_mass_defect() <= 1e-6);
    CHECK(ev.steps_taken() == 200);
}

}  // TEST_SUITE
