#pragma once

// Deterministic moment dynamics: mean-value equations for the free oscillator
// and both feedback loops, conditional (Riccati-type) and unconditional
// covariance equations, their steady states, and the Scheme II limit cycle.

#include <cstddef>

#include "cvfl/integrators.hpp"
#include "cvfl/model.hpp"

namespace cvfl {

struct MeanState {
    double x = 0.0;
    double p = 0.0;
};

struct CovState {
    double v_x = 0.5;
    double v_p = 0.5;
    double c = 0.0;

    double determinant() const { return v_x * v_p - c * c; }
    bool positive_semidefinite(double tol = 0.0) const {
        return v_x >= -tol && v_p >= -tol && determinant() >= -tol;
    }
    StateVec<3> vec() const { return {v_x, v_p, c}; }
    static CovState from(const StateVec<3>& v) { return {v[0], v[1], v[2]}; }
};

// -----------------------------------------------------------------------------
// Mean values
// -----------------------------------------------------------------------------

/// (omega p - kappa x / 2, -omega x - kappa p / 2); kappa flips sign for the
/// unstable fixed point.
StateVec<2> free_mean_rhs(const MeanState& m, const OscillatorParams& osc);

/// Free drift plus the delayed-difference feedback k (x - x_tau) on x.
StateVec<2> scheme1_mean_rhs(const MeanState& m, double x_tau, const OscillatorParams& osc,
                             double k);

/// Free drift plus k (x - x*(t)) on x.
StateVec<2> scheme2_mean_rhs(const MeanState& m, double t, const OscillatorParams& osc,
                             const FeedbackConfig& fb);

/// Limit cycle reached for k = kappa / 2 and x*(t) = -y0 cos(omega t).
MeanState scheme2_asymptote(double t, double y0, double omega, double kappa);

/// Averaged Scheme I delay equations from the constant history y0 on t <= 0.
SampledPath<2> averaged_scheme1_path(const OscillatorParams& osc, double k, double tau,
                                     const MeanState& y0, double t_end, double dt);

/// Averaged Scheme II (or free, when fb.scheme is none) mean path.
SampledPath<2> averaged_scheme2_path(const OscillatorParams& osc, const FeedbackConfig& fb,
                                     const MeanState& y0, double t_end, double dt);

/// max sqrt(x^2 + p^2) over samples [end - window, end].
double window_amplitude(const SampledPath<2>& path, std::size_t end, std::size_t window);

// -----------------------------------------------------------------------------
// Covariances
// -----------------------------------------------------------------------------

/// Conditional covariance equations under Gaussian closure. They do not
/// depend on the feedback gain, delay, or reference.
StateVec<3> conditional_cov_rhs(const CovState& cv, const OscillatorParams& osc,
                                const MeasurementParams& meas);

/// Unconditional covariances of the Scheme II loop. Linear in (Vx, Vp, C).
StateVec<3> unconditional_cov_rhs_scheme2(const CovState& cv, const OscillatorParams& osc,
                                          const MeasurementParams& meas, double k);

/// Covariances of the bath equilibrium with no measurement and no feedback:
/// hbar (n_B + 1/2) in quantum mode, 1 / (beta omega) in classical mode.
CovState free_steady_covariance(const OscillatorParams& osc,
                                MeasurementMode mode = MeasurementMode::quantum);

struct SteadyState {
    CovState cov;
    double residual = 0.0;
    int newton_iterations = 0;
    bool used_fallback = false;
};

/// Steady state of conditional_cov_rhs by damped Newton from the free steady
/// state, falling back to integration when Newton stalls or lands on a
/// non-physical root.
SteadyState conditional_steady_state(const OscillatorParams& osc,
                                     const MeasurementParams& meas);

/// Whether the averaged Scheme II mean drift is asymptotically stable.
bool scheme2_mean_stable(const OscillatorParams& osc, double k);

/// Fixed point of unconditional_cov_rhs_scheme2 via a 3x3 linear solve.
CovState unconditional_steady_state_scheme2(const OscillatorParams& osc,
                                            const MeasurementParams& meas, double k);

/// Small-gamma expansion of the conditional steady state at kappa = 0,
/// truncated after the gamma^2 terms.
CovState kappa0_series(const OscillatorParams& osc, const MeasurementParams& meas);

SampledPath<3> conditional_cov_path(const OscillatorParams& osc,
                                    const MeasurementParams& meas, const CovState& cv0,
                                    double t_end, double dt);

SampledPath<3> unconditional_cov_path_scheme2(const OscillatorParams& osc,
                                              const MeasurementParams& meas, double k,
                                              const CovState& cv0, double t_end, double dt);

/// Default fixed steps: tau / 256 for delay equations, 2 pi / (1024 omega)
/// otherwise.
double default_dde_step(double tau);
double default_ode_step(double omega);

}  // namespace cvfl
