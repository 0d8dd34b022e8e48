#include "cvfl/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cvfl {

StateVec<2> free_mean_rhs(const MeanState& m, const OscillatorParams& osc) {
    const double g = osc.mean_damping();
    return {osc.omega * m.p - 0.5 * g * m.x, -osc.omega * m.x - 0.5 * g * m.p};
}

StateVec<2> scheme1_mean_rhs(const MeanState& m, double x_tau, const OscillatorParams& osc,
                             double k) {
    auto d = free_mean_rhs(m, osc);
    d[0] += k * (m.x - x_tau);
    return d;
}

StateVec<2> scheme2_mean_rhs(const MeanState& m, double t, const OscillatorParams& osc,
                             const FeedbackConfig& fb) {
    auto d = free_mean_rhs(m, osc);
    const double k = fb.gain();
    if (k != 0.0) d[0] += k * (m.x - fb.reference(t, osc.omega));
    return d;
}

MeanState scheme2_asymptote(double t, double y0, double omega, double kappa) {
    const double c = std::cos(omega * t);
    const double s = std::sin(omega * t);
    return {y0 * c + kappa * y0 / (2.0 * omega) * s, 0.0 - y0 * s};  // no -0 at t = 0
}

SampledPath<2> averaged_scheme1_path(const OscillatorParams& osc, double k, double tau,
                                     const MeanState& y0, double t_end, double dt) {
    auto rhs = [&](double, const StateVec<2>& y, const StateVec<2>& yd) {
        return scheme1_mean_rhs({y[0], y[1]}, yd[0], osc, k);
    };
    return integrate_dde<2>(rhs, {y0.x, y0.p}, tau, 0.0, t_end, dt);
}

SampledPath<2> averaged_scheme2_path(const OscillatorParams& osc, const FeedbackConfig& fb,
                                     const MeanState& y0, double t_end, double dt) {
    auto rhs = [&](double t, const StateVec<2>& y) {
        return scheme2_mean_rhs({y[0], y[1]}, t, osc, fb);
    };
    return integrate_ode<2>(rhs, {y0.x, y0.p}, 0.0, t_end, dt);
}

double window_amplitude(const SampledPath<2>& path, std::size_t end, std::size_t window) {
    end = std::min(end, path.size() - 1);
    const std::size_t begin = end >= window ? end - window : 0;
    double amp = 0.0;
    for (std::size_t i = begin; i <= end; ++i)
        amp = std::max(amp, std::hypot(path.y[i][0], path.y[i][1]));
    return amp;
}

// -----------------------------------------------------------------------------

StateVec<3> conditional_cov_rhs(const CovState& cv, const OscillatorParams& osc,
                                const MeasurementParams& meas) {
    const Couplings cp = couplings(osc, meas);
    const double g = osc.mean_damping();
    const double w = osc.omega;
    const double loc = cp.localization;
    return {
        -g * cv.v_x + 2.0 * w * cv.c - loc * cv.v_x * cv.v_x + cp.thermal,
        -g * cv.v_p - 2.0 * w * cv.c - loc * cv.c * cv.c + cp.thermal + cp.decoherence,
        w * (cv.v_p - cv.v_x) - g * cv.c - loc * cv.v_x * cv.c,
    };
}

StateVec<3> unconditional_cov_rhs_scheme2(const CovState& cv, const OscillatorParams& osc,
                                          const MeasurementParams& meas, double k) {
    if (k != 0.0 && !(meas.gamma > 0.0)) {
        throw Error(ErrorCode::divergent_feedback,
                    "unconditional covariances diverge for feedback with gamma = 0");
    }
    const Couplings cp = couplings(osc, meas);
    const double g = osc.mean_damping();
    const double w = osc.omega;
    return {
        (2.0 * k - g) * cv.v_x + 2.0 * w * cv.c + cp.thermal +
            cp.feedback_diffusion(k, Scheme::scheme2),
        -g * cv.v_p - 2.0 * w * cv.c + cp.thermal + cp.decoherence,
        w * (cv.v_p - cv.v_x) + (k - g) * cv.c,
    };
}

CovState free_steady_covariance(const OscillatorParams& osc, MeasurementMode mode) {
    double v;
    if (mode == MeasurementMode::quantum) {
        v = osc.hbar * (osc.n_bose() + 0.5);
    } else {
        v = std::isinf(osc.beta) ? 0.0 : 1.0 / (osc.beta * osc.omega);
    }
    return {v, v, 0.0};
}

namespace {

double norm3(const StateVec<3>& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

// Solves A x = b for a 3x3 system by partial-pivot elimination. Returns false
// when the matrix is numerically singular.
bool solve3(std::array<std::array<double, 3>, 3> a, StateVec<3> b, StateVec<3>& x) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return false;
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

}  // namespace

SteadyState conditional_steady_state(const OscillatorParams& osc,
                                     const MeasurementParams& meas) {
    const Couplings cp = couplings(osc, meas);
    const double g = osc.mean_damping();
    const double w = osc.omega;
    const double loc = cp.localization;
    constexpr double kTol = 1e-13;

    auto F = [&](const CovState& v) { return conditional_cov_rhs(v, osc, meas); };

    SteadyState out;
    CovState v = free_steady_covariance(osc, meas.mode);
    if (v.v_x <= 0.0) v = {osc.hbar / 2.0, osc.hbar / 2.0, 0.0};
    double res = norm3(F(v));

    for (int it = 0; it < 200 && res > kTol; ++it) {
        const std::array<std::array<double, 3>, 3> jac{{
            {-g - 2.0 * loc * v.v_x, 0.0, 2.0 * w},
            {0.0, -g, -2.0 * w - 2.0 * loc * v.c},
            {-w - loc * v.c, w, -g - loc * v.v_x},
        }};
        const auto f = F(v);
        StateVec<3> delta{};
        if (!solve3(jac, {-f[0], -f[1], -f[2]}, delta)) break;

        // Backtrack until the residual decreases.
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt, lambda *= 0.5) {
            const CovState trial{v.v_x + lambda * delta[0], v.v_p + lambda * delta[1],
                                 v.c + lambda * delta[2]};
            const double r = norm3(F(trial));
            if (std::isfinite(r) && r < res) {
                v = trial;
                res = r;
                accepted = true;
                break;
            }
        }
        out.newton_iterations = it + 1;
        if (!accepted) break;
    }

    const bool physical = v.v_x > 0.0 && v.v_p > 0.0 && v.determinant() > 0.0;
    if (res > 1e-10 || !physical) {
        // Integrate to convergence from the free state.
        CovState y = free_steady_covariance(osc, meas.mode);
        const double dt = 0.25 / std::max({osc.omega, osc.kappa, loc, 1e-3});
        for (int i = 0; i < 10'000'000; ++i) {
            const auto next = rk4_step<3>(
                [&](double, const StateVec<3>& s) { return F(CovState::from(s)); }, 0.0,
                y.vec(), dt);
            y = CovState::from(next);
            if (i % 64 == 0 && norm3(F(y)) < 1e-12) break;
        }
        v = y;
        res = norm3(F(v));
        out.used_fallback = true;
    }
    out.cov = v;
    out.residual = res;
    return out;
}

bool scheme2_mean_stable(const OscillatorParams& osc, double k) {
    const double g = osc.mean_damping();
    const double trace = k - g;
    const double det = -(k - 0.5 * g) * 0.5 * g + osc.omega * osc.omega;
    return trace < 0.0 && det > 0.0;
}

CovState unconditional_steady_state_scheme2(const OscillatorParams& osc,
                                            const MeasurementParams& meas, double k) {
    if (!scheme2_mean_stable(osc, k)) {
        throw Error(ErrorCode::analysis,
                    "no stationary covariance: Scheme II mean drift is not stable");
    }
    // rhs(v) = A v + b is affine; read A and b off by evaluating at unit vectors.
    const auto b = unconditional_cov_rhs_scheme2({0.0, 0.0, 0.0}, osc, meas, k);
    std::array<std::array<double, 3>, 3> a{};
    for (int j = 0; j < 3; ++j) {
        StateVec<3> e{};
        e[j] = 1.0;
        const auto col = unconditional_cov_rhs_scheme2(CovState::from(e), osc, meas, k);
        for (int i = 0; i < 3; ++i) a[i][j] = col[i] - b[i];
    }
    StateVec<3> x{};
    if (!solve3(a, {-b[0], -b[1], -b[2]}, x)) {
        throw Error(ErrorCode::analysis, "singular unconditional covariance system");
    }
    return CovState::from(x);
}

CovState kappa0_series(const OscillatorParams& osc, const MeasurementParams& meas) {
    const double hbar = osc.hbar;
    const double eta = meas.efficiency(hbar);
    const double se = std::sqrt(eta);
    const double g = meas.gamma;
    const double w2 = osc.omega * osc.omega;
    return {
        hbar / (2.0 * se) - se * hbar * g * g / (16.0 * w2),
        hbar / (2.0 * se) + 3.0 * se * hbar * g * g / (16.0 * w2),
        hbar * g / (4.0 * osc.omega),
    };
}

SampledPath<3> conditional_cov_path(const OscillatorParams& osc,
                                    const MeasurementParams& meas, const CovState& cv0,
                                    double t_end, double dt) {
    auto rhs = [&](double, const StateVec<3>& s) {
        return conditional_cov_rhs(CovState::from(s), osc, meas);
    };
    return integrate_ode<3>(rhs, cv0.vec(), 0.0, t_end, dt);
}

SampledPath<3> unconditional_cov_path_scheme2(const OscillatorParams& osc,
                                              const MeasurementParams& meas, double k,
                                              const CovState& cv0, double t_end, double dt) {
    auto rhs = [&](double, const StateVec<3>& s) {
        return unconditional_cov_rhs_scheme2(CovState::from(s), osc, meas, k);
    };
    return integrate_ode<3>(rhs, cv0.vec(), 0.0, t_end, dt);
}

double default_dde_step(double tau) { return tau / 256.0; }

double default_ode_step(double omega) { return 2.0 * std::numbers::pi / (1024.0 * omega); }

}  // namespace cvfl
