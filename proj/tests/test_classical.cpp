#include <doctest.h>

#include <cmath>

#include "cvfl/classical.hpp"
#include "cvfl/rng.hpp"

using namespace cvfl;

namespace {

// Positive root of (2 gamma / sigma) V^2 + (4a / kappa) V - 4T / kappa = 0.
double quadratic_root(const OverdampedParams& op) {
    const double A = 2 * op.gamma / op.sigma, B = 4 * op.potential.a / op.kappa,
                 C = -4 * op.T / op.kappa;
    return (-B + std::sqrt(B * B - 4 * A * C)) / (2 * A);
}

}  // namespace

TEST_SUITE("classical") {

TEST_CASE("steady conditional variance") {
    OverdampedParams op;
    CHECK(steady_conditional_variance(op) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(conditional_variance_rhs(1.0, op) == doctest::Approx(0.0));

    for (double sigma : {3.0, 1.0, 0.1, 0.01, 1e-6}) {
        for (double T : {0.2, 1.0, 4.0}) {
            OverdampedParams o = op;
            o.sigma = sigma;
            o.T = T;
            o.kappa = 0.7;
            o.potential.a = 1.3;
            CHECK(steady_conditional_variance(o) == doctest::Approx(quadratic_root(o)).epsilon(1e-10));
        }
    }
    op.sigma = 0.01;
    CHECK(steady_conditional_variance(op) == doctest::Approx(0.005 * (std::sqrt(801.0) - 1.0)));
}

TEST_CASE("steady variance monotonicity") {
    OverdampedParams op;
    double prev = 0.0;
    for (double sigma : {1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0}) {
        op.sigma = sigma;
        const double v = steady_conditional_variance(op);
        CHECK(v > prev);
        prev = v;
    }
    op = {};
    prev = 0.0;
    for (double T : {0.1, 0.5, 1.0, 2.0}) {
        op.T = T;
        const double v = steady_conditional_variance(op);
        CHECK(v > prev);
        prev = v;
    }
    op = {};
    prev = kInfinity;
    for (double g : {0.1, 0.5, 1.0, 5.0}) {
        op.gamma = g;
        const double v = steady_conditional_variance(op);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("variance ODE") {
    OverdampedParams op;
    op.kappa = 2.0;
    op.T = 0.5;
    op.sigma = 0.4;
    op.gamma = 0.3;
    op.potential.a = 0.8;
    CHECK(conditional_variance_rhs(0.6, op) ==
          doctest::Approx(4 * 0.5 / 2.0 - 4 * 0.8 / 2.0 * 0.6 - 2 * 0.3 / 0.4 * 0.36));
    for (double v0 : {0.01, 5.0}) {
        CHECK(integrate_conditional_variance(op, v0, 1e-3) ==
              doctest::Approx(steady_conditional_variance(op)).epsilon(1e-10));
    }

    // Without drift and noise the mean stays put and V follows the ODE.
    ConditionalGaussian1D s{0.0, 0.2};
    const auto n = overdamped_conditional_step(s, 0.0, op, 1e-3);
    CHECK(n.m == 0.0);
    CHECK(n.v == doctest::Approx(0.2 + 1e-3 * conditional_variance_rhs(0.2, op)).epsilon(1e-6));

    // The mean update: -(2/kappa) U'(m) dt + sqrt(2 gamma / sigma) V dW.
    ConditionalGaussian1D t{1.0, 0.2};
    const auto u = overdamped_conditional_step(t, 0.1, op, 1e-3);
    CHECK(u.m == doctest::Approx(1.0 - 1.0 * 1.6 * 1e-3 + std::sqrt(1.5) * 0.2 * 0.1));
}

TEST_CASE("parameter validation") {
    OverdampedParams op;
    op.sigma = 0.0;
    CHECK_THROWS_AS(require_valid(op), Error);
    op = {};
    op.potential.a = 0.0;
    CHECK_THROWS_AS(require_valid(op), Error);
    op = {};
    op.T = -1.0;
    CHECK_THROWS_AS(require_valid(op), Error);
    CHECK_NOTHROW(require_valid(OverdampedParams{}));
}

TEST_CASE("zero-temperature Langevin relaxation") {
    OverdampedParams op;
    op.T = 0.0;
    op.kappa = 0.5;
    const double dt = 1e-5, t = 0.3;
    double x = 2.0;
    for (int i = 0; i < static_cast<int>(t / dt); ++i) x = langevin_step(x, op, 0.37, dt);
    CHECK(x == doctest::Approx(2.0 * std::exp(-2.0 * t / op.kappa)).epsilon(1e-4));
}

TEST_CASE("Langevin stationary variance and step independence") {
    OverdampedParams op;
    op.kappa = 0.8;
    op.T = 0.6;
    op.potential.a = 0.75;
    EquivalenceSettings s;
    s.trajectories = 400;
    s.burn_in = 5.0;
    s.samples = 60;
    s.sample_every = 0.5;
    const auto a = langevin_statistics(op, s, 3);
    CHECK(a.variance == doctest::Approx(op.equilibrium_variance()).epsilon(0.03));
    CHECK(a.variance_se > 0.0);
    // Stationary autocorrelation exp(-4a lag / kappa).
    CHECK(a.autocorrelation == doctest::Approx(std::exp(-4 * 0.75 * s.lag / 0.8)).epsilon(0.05));

    s.dt /= 2.0;
    const auto b = langevin_statistics(op, s, 3);
    CHECK(std::abs(a.variance - b.variance) <
          4.0 * std::hypot(a.variance_se, b.variance_se) + 2e-3);
}

TEST_CASE("density oracle without measurement relaxes to the Langevin law") {
    // dW = 0 still carries the -dt part of the Ito correction, so switch the
    // measurement off through gamma.
    OverdampedParams op;
    op.gamma = 1e-12;
    OverdampedDensity d(op, 200, -8.0, 8.0, 1.0, 0.3);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-12));
    const double dt = 0.5 * d.max_stable_step();
    for (double t = 0.0; t < 12.0; t += dt) d.step(0.0, dt);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(d.mean()) < 1e-4);
    CHECK(d.variance() == doctest::Approx(op.equilibrium_variance()).epsilon(0.01));
}

TEST_CASE("density oracle with a silent record follows the filter variance") {
    // With dW = 0 the density keeps its Gaussian shape and its variance obeys
    // the exact filter equation dV/dt = 4T/kappa - (8a/kappa) V - (2 gamma/sigma) V^2.
    OverdampedParams op;
    OverdampedDensity d(op, 240, -8.0, 8.0, 0.0, 1.0);
    const double dt = 0.5 * d.max_stable_step();
    for (double t = 0.0; t < 12.0; t += dt) d.step(0.0, dt);
    CHECK(d.variance() == doctest::Approx(std::sqrt(3.0) - 1.0).epsilon(0.01));
}

TEST_CASE("density oracle under measurement conditions the mean") {
    OverdampedParams op;
    OverdampedDensity d(op, 200, -8.0, 8.0, 0.0, 1.0);
    const double v = d.variance();
    d.step(0.1, 1e-4);
    // Gaussian-closure innovation: sqrt(2 gamma / sigma) V dW.
    CHECK(d.mean() == doctest::Approx(std::sqrt(2.0) * v * 0.1).epsilon(0.02));
}

}  // TEST_SUITE
