#pragma once

// Parameter objects shared by every part of cv-feedback-lab: the damped
// oscillator and its bath, the continuous position measurement, and the
// feedback loop. All quantities are in rescaled canonical units where the
// Hamiltonian reads omega (p^2 + x^2) / 2.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvfl {

// =============================================================================
// Errors
// =============================================================================

enum class ErrorCode {
    parameter,       ///< a physical parameter is outside its domain
    configuration,   ///< inconsistent run configuration (dt, delay, keys)
    divergence,      ///< non-finite state during integration
    delay,           ///< delay line read before it holds data
    no_measurement,  ///< measurement record requested with gamma = 0
    divergent_feedback,
    step_size,       ///< explicit grid step violates the stability bound
    integrity,       ///< field mass drifted out of tolerance
    analysis,        ///< root finder did not converge
    range,           ///< bracketing interval has no sign change
    shape,           ///< mismatched time grids in ensemble reduction
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// =============================================================================
// Parameter types
// =============================================================================

enum class FixedPointKind { stable, unstable };
enum class MeasurementMode { quantum, classical };
enum class Scheme { none, scheme1, scheme2 };

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct OscillatorParams {
    double omega = 1.0;
    double kappa = 0.1;
    double hbar = 1.0;
    double beta = kInfinity;  ///< +infinity encodes T = 0
    FixedPointKind fixed_point = FixedPointKind::stable;

    double n_bose() const;

    /// Damping that enters the mean drift. The unstable variant flips its
    /// sign; diffusion coefficients always use the positive kappa.
    double mean_damping() const {
        return fixed_point == FixedPointKind::unstable ? -kappa : kappa;
    }
};

struct MeasurementParams {
    double gamma = 1.0;
    double eta = 1.0;
    MeasurementMode mode = MeasurementMode::quantum;
    double sigma = 1.0;  ///< classical error scale, unused in quantum mode

    /// Detector efficiency seen by the equations. In classical mode this is
    /// hbar / sigma and is never stored.
    double efficiency(double hbar) const {
        return mode == MeasurementMode::classical ? hbar / sigma : eta;
    }

    /// Classical measurements with sigma below tol are treated as error-free.
    bool error_free(double tol = 1e-8) const {
        return mode == MeasurementMode::classical && sigma <= tol;
    }
};

/// Reference waveform x*(t) = -y0 cos(Omega t + phi). Omega defaults to the
/// oscillator frequency when unset.
struct Reference {
    double y0 = 2.0;
    std::optional<double> Omega;
    double phi = 0.0;

    double frequency(double omega) const { return Omega.value_or(omega); }
    double operator()(double t, double omega) const {
        return -y0 * std::cos(frequency(omega) * t + phi);
    }
};

struct FeedbackConfig {
    Scheme scheme = Scheme::none;
    double k = 0.0;
    double tau = std::numbers::pi;
    Reference reference;

    double gain() const { return scheme == Scheme::none ? 0.0 : k; }
};

struct GaussianState {
    double mean_x = 0.0;
    double mean_p = 0.0;
    double v_x = 0.5;
    double v_p = 0.5;
    double c = 0.0;

    double determinant() const { return v_x * v_p - c * c; }
};

/// Derived noise and diffusion constants for one (oscillator, measurement)
/// pair. Every stochastic module reads its amplitudes from here so that the
/// quantum/classical switch lives in exactly one place.
struct Couplings {
    double backaction = 0.0;        ///< sqrt(2 gamma eta / hbar), or sqrt(2 gamma / sigma)
    double localization = 0.0;      ///< backaction^2
    double record_amplitude = 0.0;  ///< sqrt(hbar / 2 gamma eta), or sqrt(sigma / 2 gamma)
    double thermal = 0.0;           ///< kappa hbar (1 + 2 n_B) / 2, or kappa / (beta omega)
    double decoherence = 0.0;       ///< hbar gamma / 2 (quantum only)

    /// Diffusion D_xx added by feeding a noisy record back with gain k.
    /// Scheme I feeds back a difference of two independent increments and
    /// doubles it.
    double feedback_diffusion(double k, Scheme scheme) const;
};

Couplings couplings(const OscillatorParams& osc, const MeasurementParams& meas);

// =============================================================================
// Operations
// =============================================================================

/// Bose-Einstein occupation 1 / (exp(beta hbar omega) - 1); zero at beta = inf.
double bose_einstein(double beta, double hbar, double omega);

/// Switches a measurement to the classical error model eta = hbar / sigma.
/// gamma is preserved.
MeasurementParams to_classical(const MeasurementParams& q, double sigma);

/// Record noise amplitude sqrt(hbar / 2 gamma eta), or sqrt(sigma / 2 gamma)
/// in classical mode.
double record_noise_amplitude(const MeasurementParams& meas, double hbar);

struct Violation {
    std::string code;
    std::string message;
};

std::vector<Violation> validate(const OscillatorParams& osc,
                                const MeasurementParams& meas,
                                const FeedbackConfig& fb);

/// Throws Error(parameter) listing every violation.
void require_valid(const OscillatorParams& osc, const MeasurementParams& meas,
                   const FeedbackConfig& fb);

const char* to_string(Scheme scheme);
const char* to_string(MeasurementMode mode);
const char* to_string(FixedPointKind kind);

}  // namespace cvfl
