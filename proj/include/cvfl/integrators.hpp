#pragma once

// Fixed-step classical Runge-Kutta integration for small ODE systems and for
// delay systems with a constant pre-history (method of steps).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cvfl/model.hpp"

namespace cvfl {

template <std::size_t N>
using StateVec = std::array<double, N>;

template <std::size_t N>
struct SampledPath {
    std::vector<double> t;
    std::vector<StateVec<N>> y;

    std::size_t size() const { return t.size(); }
    const StateVec<N>& back() const { return y.back(); }
};

namespace detail {

template <std::size_t N>
inline StateVec<N> axpy(const StateVec<N>& y, double h, const StateVec<N>& k) {
    StateVec<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h * k[i];
    return out;
}

template <std::size_t N>
inline void require_finite(const StateVec<N>& y, double t) {
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::divergence,
                        "non-finite state at t = " + std::to_string(t));
        }
    }
}

inline std::size_t step_count(double t0, double t1, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw Error(ErrorCode::configuration, "integration step must be positive");
    }
    if (!(t1 > t0)) throw Error(ErrorCode::configuration, "empty time span");
    return static_cast<std::size_t>(std::ceil((t1 - t0) / dt - 1e-9));
}

}  // namespace detail

/// One RK4 step of y' = rhs(t, y).
template <std::size_t N, class Rhs>
StateVec<N> rk4_step(Rhs&& rhs, double t, const StateVec<N>& y, double h) {
    const StateVec<N> k1 = rhs(t, y);
    const StateVec<N> k2 = rhs(t + 0.5 * h, detail::axpy(y, 0.5 * h, k1));
    const StateVec<N> k3 = rhs(t + 0.5 * h, detail::axpy(y, 0.5 * h, k2));
    const StateVec<N> k4 = rhs(t + h, detail::axpy(y, h, k3));
    StateVec<N> out;
    for (std::size_t i = 0; i < N; ++i)
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Integrates y' = rhs(t, y) over [t0, t1] with fixed step dt, sampling every
/// step. The last step is shortened so the path ends exactly at t1.
template <std::size_t N, class Rhs>
SampledPath<N> integrate_ode(Rhs&& rhs, const StateVec<N>& y0, double t0, double t1,
                             double dt) {
    const std::size_t n = detail::step_count(t0, t1, dt);
    SampledPath<N> path;
    path.t.reserve(n + 1);
    path.y.reserve(n + 1);
    path.t.push_back(t0);
    path.y.push_back(y0);
    StateVec<N> y = y0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        const double h = (i + 1 == n) ? t1 - t : dt;
        y = rk4_step<N>(rhs, t, y, h);
        detail::require_finite(y, t + h);
        path.t.push_back(i + 1 == n ? t1 : t + h);
        path.y.push_back(y);
    }
    return path;
}

/// Number of grid steps per delay; throws unless tau / dt is a positive
/// integer to within 1e-9 relative.
inline std::size_t delay_steps(double tau, double dt) {
    if (!(tau > 0.0) || !(dt > 0.0)) {
        throw Error(ErrorCode::configuration, "delay and step must be positive");
    }
    const double ratio = tau / dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
        throw Error(ErrorCode::configuration,
                    "tau / dt = " + std::to_string(ratio) + " is not a positive integer");
    }
    return static_cast<std::size_t>(rounded);
}

/// Method-of-steps RK4 for y' = rhs(t, y, y(t - tau)) with y(t) = y0 for
/// t <= t0. dt must divide tau exactly. Delayed values at step endpoints are
/// read from stored samples; the half-step stages use the cubic Hermite
/// extension of the stored samples and their derivatives, which keeps the
/// scheme fourth order. The path runs to the first grid point >= t1.
template <std::size_t N, class Rhs>
SampledPath<N> integrate_dde(Rhs&& rhs, const StateVec<N>& y0, double tau, double t0,
                             double t1, double dt) {
    const std::size_t lag = delay_steps(tau, dt);
    const std::size_t n = detail::step_count(t0, t1, dt);

    SampledPath<N> path;
    path.t.reserve(n + 1);
    path.y.reserve(n + 1);
    std::vector<StateVec<N>> deriv;
    deriv.reserve(n + 1);

    auto delayed_sample = [&](std::ptrdiff_t idx) -> StateVec<N> {
        return idx <= 0 ? y0 : path.y[idx];
    };
    // Hermite midpoint of [idx, idx + 1]; constant history before t0.
    auto delayed_mid = [&](std::ptrdiff_t idx) -> StateVec<N> {
        if (idx < 0) return y0;
        const auto& a = path.y[idx];
        const auto& b = path.y[idx + 1];
        const auto& fa = deriv[idx];
        const auto& fb = deriv[idx + 1];
        StateVec<N> out;
        for (std::size_t i = 0; i < N; ++i)
            out[i] = 0.5 * (a[i] + b[i]) + dt / 8.0 * (fa[i] - fb[i]);
        return out;
    };

    path.t.push_back(t0);
    path.y.push_back(y0);
    deriv.push_back(rhs(t0, y0, y0));

    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) * dt;
        const auto j = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(lag);
        const StateVec<N> d0 = delayed_sample(j);
        const StateVec<N> dm = delayed_mid(j);
        const StateVec<N> d1 = delayed_sample(j + 1);
        const StateVec<N> y = path.y[i];

        const StateVec<N> k1 = rhs(t, y, d0);
        const StateVec<N> k2 = rhs(t + 0.5 * dt, detail::axpy(y, 0.5 * dt, k1), dm);
        const StateVec<N> k3 = rhs(t + 0.5 * dt, detail::axpy(y, 0.5 * dt, k2), dm);
        const StateVec<N> k4 = rhs(t + dt, detail::axpy(y, dt, k3), d1);
        StateVec<N> next;
        for (std::size_t c = 0; c < N; ++c)
            next[c] = y[c] + dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        detail::require_finite(next, t + dt);

        path.t.push_back(t0 + static_cast<double>(i + 1) * dt);
        path.y.push_back(next);
        deriv.push_back(rhs(path.t.back(), next, delayed_sample(j + 1)));
    }
    return path;
}

}  // namespace cvfl
