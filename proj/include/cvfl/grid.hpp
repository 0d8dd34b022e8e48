#pragma once

// Finite-volume evolution of a phase-space density W(x, p) on a uniform
// cell-centred lattice. The deterministic part is a Fokker-Planck equation
//
//   dW/dt = -div(d W) + 1/2 div(D grad W)
//
// with affine drift and constant diffusion; the measurement and feedback
// noise enter as separate stochastic updates applied after each deterministic
// step.

#include <cstddef>
#include <string>
#include <vector>

#include "cvfl/model.hpp"
#include "cvfl/rng.hpp"

namespace cvfl {

struct GridSpec {
    std::size_t nx = 256;
    std::size_t np = 256;
    double x_min = -6.0, x_max = 6.0;
    double p_min = -6.0, p_max = 6.0;

    static GridSpec centered(std::size_t n, double half_width) {
        return {n, n, -half_width, half_width, -half_width, half_width};
    }

    double hx() const { return (x_max - x_min) / static_cast<double>(nx); }
    double hp() const { return (p_max - p_min) / static_cast<double>(np); }
    double x(std::size_t i) const { return x_min + (static_cast<double>(i) + 0.5) * hx(); }
    double p(std::size_t j) const { return p_min + (static_cast<double>(j) + 0.5) * hp(); }
    std::size_t size() const { return nx * np; }
};

/// Values stored x-major: w[i * np + j] is the cell at (x(i), p(j)).
struct GridField {
    GridSpec spec;
    std::vector<double> w;

    explicit GridField(const GridSpec& s = {}) : spec(s), w(s.size(), 0.0) {}

    double& at(std::size_t i, std::size_t j) { return w[i * spec.np + j]; }
    double at(std::size_t i, std::size_t j) const { return w[i * spec.np + j]; }
    double mass() const;
    void renormalize();
};

/// Gaussian density with the given means and covariances, normalised on the grid.
GridField gaussian_field(const GridSpec& spec, double mean_x, double mean_p, double v_x,
                         double v_p, double c);

/// Affine drift (a_xx x + a_xp p + b_x, a_px x + a_pp p + b_p) and constant
/// diffusion in the 1/2 div(D grad) convention.
struct FpeCoefficients {
    double a_xx = 0.0, a_xp = 0.0, b_x = 0.0;
    double a_px = 0.0, a_pp = 0.0, b_p = 0.0;
    double d_xx = 0.0, d_pp = 0.0, d_xp = 0.0;

    double drift_x(double x, double p) const { return a_xx * x + a_xp * p + b_x; }
    double drift_p(double x, double p) const { return a_px * x + a_pp * p + b_p; }
    bool diffusion_psd() const {
        return d_xx >= 0.0 && d_pp >= 0.0 && d_xx * d_pp >= d_xp * d_xp;
    }
};

/// Coefficient table for one configuration. Time dependence (reference
/// waveform) and the Scheme I delayed mean enter only through b_x.
struct CoefficientModel {
    FpeCoefficients base;
    Scheme scheme = Scheme::none;
    double k = 0.0;
    double omega = 1.0;
    Reference reference;

    FpeCoefficients at(double t, double delayed_mean_x = 0.0) const;
};

CoefficientModel coefficients_for(MeasurementMode mode, const OscillatorParams& osc,
                                  const MeasurementParams& meas, const FeedbackConfig& fb);

/// Noise amplitudes of the stochastic updates: measurement (x - <x>) W dW and
/// feedback translation -shift dW dW/dx.
struct StochasticAmplitudes {
    double measurement = 0.0;  ///< sqrt(2 gamma eta / hbar), or sqrt(2 gamma / sigma)
    double shift = 0.0;        ///< k sqrt(hbar / 2 gamma eta), or k sqrt(sigma / 2 gamma)
};

StochasticAmplitudes stochastic_amplitudes(const OscillatorParams& osc,
                                           const MeasurementParams& meas, double k);

enum class Advection { upwind1, muscl };
enum class StochasticScheme { euler, milstein };

/// Largest explicit step allowed on this grid:
/// 0.4 min(hx/|d_x|max, hp/|d_p|max, hx^2/2D_xx, hp^2/2D_pp).
double max_stable_step(const GridSpec& spec, const FpeCoefficients& co);

/// One explicit deterministic step with zero-flux boundaries. upwind1 is
/// forward Euler with first-order upwind fluxes; muscl uses van Leer limited
/// reconstruction with a two-stage Heun update. Throws Error(step_size) if dt
/// exceeds max_stable_step.
void fpe_step(GridField& field, const FpeCoefficients& co, double dt,
              Advection advection = Advection::muscl);

/// W += amplitude dW (x - <x>) W, with <x> taken from the grid.
void measurement_update(GridField& field, double dW, double amplitude);

/// W -= shift noise dW/dx by centred differences. noise is dW for Scheme II
/// and dW - dW_tau for Scheme I.
void feedback_noise_update(GridField& field, double noise, double shift);

/// Measurement plus feedback noise driven by the same dW, including the
/// second-order (dW^2 - dt) correction of the combined multiplicative term.
/// extra_shift_noise is added to the feedback translation at first order
/// only (Scheme I: -dW_tau).
void milstein_update(GridField& field, const StochasticAmplitudes& amp, double dW, double dt,
                     double extra_shift_noise = 0.0);

struct GridMoments {
    double mass = 0.0;
    double mean_x = 0.0, mean_p = 0.0;
    double v_x = 0.0, v_p = 0.0, c = 0.0;
    double k30 = 0.0, k21 = 0.0, k12 = 0.0, k03 = 0.0;  ///< third cumulants

    double max_third_cumulant() const;
};

/// Midpoint-rule moments. Throws Error(integrity) when |mass - 1| > 1e-3.
GridMoments moments(const GridField& field);

struct GridRunConfig {
    OscillatorParams osc;
    MeasurementParams meas;
    FeedbackConfig fb;
    GridSpec spec;
    double dt = 0.0;  ///< 0 selects 0.9 max_stable_step of the initial coefficients
    Advection advection = Advection::muscl;
    StochasticScheme stochastic = StochasticScheme::milstein;
    bool conditional = true;  ///< apply measurement and feedback-noise updates
};

/// Composite step: deterministic FPE, then (if conditional) measurement and
/// feedback noise, then renormalisation. Classical fields are clamped at
/// -1e-12; Wigner fields never are.
class GridEvolver {
public:
    GridEvolver(const GridRunConfig& cfg, GridField initial);

    double dt() const { return dt_; }
    double time() const { return t_; }
    std::size_t steps_taken() const { return steps_; }
    const GridField& field() const { return field_; }

    /// dW drives measurement and feedback noise; dW_tau is the Scheme I
    /// delayed increment.
    void step(double dW = 0.0, double dW_tau = 0.0);

    /// Largest |mass - 1| seen after a step and before renormalisation.
    double max_mass_defect() const { return max_mass_defect_; }
    std::size_t clamped_cells() const { return clamped_; }

private:
    GridRunConfig cfg_;
    CoefficientModel model_;
    StochasticAmplitudes amp_;
    GridField field_;
    DelayLine mean_history_;
    double dt_ = 0.0;
    double t_ = 0.0;
    double mean_x_ = 0.0;
    std::size_t steps_ = 0;
    std::size_t lag_ = 0;
    double max_mass_defect_ = 0.0;
    std::size_t clamped_ = 0;
    bool warned_ = false;
};

const char* to_string(Advection a);
const char* to_string(StochasticScheme s);
Advection parse_advection(const std::string& s);
StochasticScheme parse_stochastic_scheme(const std::string& s);

}  // namespace cvfl
