#pragma once

// Linear stability of the averaged Scheme I loop
//
//   x' = omega p - kappa x / 2 + k (x - x(t - tau)),   p' = -omega x - kappa p / 2
//
// through the roots of its characteristic function, with a direct simulation
// of the delay equation as a cross-check.

#include <complex>
#include <cstddef>
#include <vector>

#include "cvfl/model.hpp"

namespace cvfl {

struct CharacteristicProblem {
    double omega = 1.0;
    double kappa = 0.1;
    double k = 0.0;
    double tau = std::numbers::pi;
};

using Complex = std::complex<double>;

/// (lambda + kappa/2)(lambda + kappa/2 - k (1 - exp(-lambda tau))) + omega^2.
Complex char_fn(Complex lambda, const CharacteristicProblem& cp);
Complex char_fn_derivative(Complex lambda, const CharacteristicProblem& cp);

/// Distinct roots found by multistart Newton from a 20 x 20 seed grid over
/// Re in [-2 kappa - k, k + kappa], Im in [0, omega + 2 pi / tau], together
/// with their conjugates, sorted by decreasing real part.
std::vector<Complex> characteristic_roots(const CharacteristicProblem& cp);

/// Root with the largest real part; residual <= 1e-10. Throws
/// Error(analysis) when no seed converges.
Complex rightmost_root(const CharacteristicProblem& cp);

/// Gain in [k_lo, k_hi] where Re lambda* crosses zero, by bisection to
/// |Re lambda*| <= 1e-8. Throws Error(range) without a sign change.
double critical_gain(double tau, const OscillatorParams& osc, double k_lo = 0.0,
                     double k_hi = 0.27);

enum class Stability { stable, unstable, marginal };
const char* to_string(Stability s);

struct Classification {
    Stability verdict = Stability::marginal;
    double amplitude_half = 0.0;  ///< last-delay-window amplitude at horizon / 2
    double amplitude_end = 0.0;   ///< and at horizon
    double ratio() const { return amplitude_end / amplitude_half; }
};

/// Integrates the averaged delay equation from constant history (1, 0) and
/// compares window amplitudes at horizon and horizon / 2 with a +-2% band.
Classification simulate_classify(const CharacteristicProblem& cp, double horizon = 400.0);

struct ChartCell {
    double k = 0.0;
    double tau = 0.0;
    double re_lambda = 0.0;
    Stability simulated = Stability::marginal;
    bool marginal_root = false;  ///< |Re lambda*| < 1e-3, excluded from agreement
    bool agrees = true;
};

/// Root and simulation classification on the grid ks x taus.
std::vector<ChartCell> stability_chart(double omega, double kappa,
                                       const std::vector<double>& ks,
                                       const std::vector<double>& taus, double horizon = 400.0,
                                       unsigned workers = 1);

/// n evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace cvfl
