#pragma once

// Classical limit: the Brownian oscillator Fokker-Planck coefficients, and the
// overdamped particle in a quadratic potential under continuous position
// measurement with error scale sigma, including its sigma -> 0 Langevin limit.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvfl/grid.hpp"
#include "cvfl/model.hpp"

namespace cvfl {

/// Drift (omega p - kappa x/2, -omega x - kappa p/2) and thermal diffusion
/// D_xx = D_pp = kappa / (beta omega); zero diffusion at beta = infinity.
FpeCoefficients classical_free_coefficients(const OscillatorParams& osc);

/// U(x) = a x^2 + b x + c.
struct QuadraticPotential {
    double a = 0.5;
    double b = 0.0;
    double c = 0.0;

    double value(double x) const { return (a * x + b) * x + c; }
    double slope(double x) const { return 2.0 * a * x + b; }
    double minimum() const { return -b / (2.0 * a); }
};

struct OverdampedParams {
    double kappa = 1.0;
    double T = 1.0;
    double sigma = 1.0;
    double gamma = 1.0;
    QuadraticPotential potential;

    /// Equilibrium variance of the Langevin process, T / (2a).
    double equilibrium_variance() const { return T / (2.0 * potential.a); }
};

/// Throws Error(parameter) unless kappa, gamma, sigma, a > 0 and T >= 0.
void require_valid(const OverdampedParams& op);

struct ConditionalGaussian1D {
    double m = 0.0;
    double v = 1.0;
};

/// dV/dt = 4T/kappa - (4a/kappa) V - (2 gamma / sigma) V^2.
double conditional_variance_rhs(double v, const OverdampedParams& op);

/// Positive root of conditional_variance_rhs:
/// (a sigma / gamma kappa) (sqrt(1 + 2 T gamma kappa / (a^2 sigma)) - 1).
double steady_conditional_variance(const OverdampedParams& op);

/// Integrates conditional_variance_rhs from v0 until |dV/dt| < tol.
double integrate_conditional_variance(const OverdampedParams& op, double v0, double dt,
                                      double tol = 1e-13);

/// Gaussian-closure step: Euler-Maruyama for the mean,
/// dm = -(2/kappa) <U'> dt + sqrt(2 gamma / sigma) V dW, and RK4 for V.
ConditionalGaussian1D overdamped_conditional_step(const ConditionalGaussian1D& s, double dW,
                                                  const OverdampedParams& op, double dt);

/// x' = x - (2/kappa) U'(x) dt + sqrt(4T/kappa) dW.
double langevin_step(double x, const OverdampedParams& op, double dW, double dt);

// -----------------------------------------------------------------------------
// Full 1D conditional density, used as an oracle for the Gaussian closure
// -----------------------------------------------------------------------------

/// Conditional density P(x) on a uniform cell-centred grid, evolved by
/// dP = d/dx((2U'/kappa) P + (2T/kappa) dP/dx) dt + sqrt(2 gamma/sigma) (x - <x>) P dW.
class OverdampedDensity {
public:
    OverdampedDensity(const OverdampedParams& op, std::size_t n, double x_min, double x_max,
                      double mean, double variance);

    double max_stable_step() const;
    void step(double dW, double dt);

    double mean() const;
    double variance() const;
    double mass() const;
    const std::vector<double>& values() const { return p_; }

private:
    OverdampedParams op_;
    std::size_t n_;
    double x_min_, h_;
    std::vector<double> p_, scratch_;
    double x(std::size_t i) const { return x_min_ + (static_cast<double>(i) + 0.5) * h_; }
};

/// Time-averaged conditional variance of OverdampedDensity over the second
/// half of [0, t_end].
double density_steady_variance(const OverdampedParams& op, std::uint64_t seed,
                               double t_end = 40.0, std::size_t n = 240,
                               double half_width = 8.0);

// -----------------------------------------------------------------------------
// Error-free limit
// -----------------------------------------------------------------------------

struct EquivalenceSettings {
    std::size_t trajectories = 2000;
    double dt = 2e-3;
    double burn_in = 10.0;
    double sample_every = 0.5;
    std::size_t samples = 100;  ///< per trajectory, after burn-in
    double lag = 0.5;           ///< autocorrelation lag
    unsigned workers = 1;
};

struct StationaryEstimate {
    double variance = 0.0;
    double variance_se = 0.0;
    double autocorrelation = 0.0;  ///< at EquivalenceSettings::lag
    std::size_t samples = 0;
};

/// Stationary statistics of m_c (Gaussian closure, V_c held at its steady
/// value). Standard errors account for serial correlation between samples of
/// the same trajectory.
StationaryEstimate conditional_mean_statistics(const OverdampedParams& op,
                                               const EquivalenceSettings& s,
                                               std::uint64_t seed);

/// Same statistics for the Langevin process.
StationaryEstimate langevin_statistics(const OverdampedParams& op,
                                       const EquivalenceSettings& s, std::uint64_t seed);

struct EquivalenceRow {
    double sigma = 0.0;
    double v_c_closed = 0.0;
    double v_c_numeric = 0.0;
    StationaryEstimate mean_stats;
    double total_variance = 0.0;  ///< Var(m_c) + V_c
    double total_z = 0.0;         ///< (total - T/2a) / SE
    double variance_mismatch = 0.0;      ///< |Var(m_c) - Var(x*)|
    double autocorrelation_mismatch = 0.0;
};

struct EquivalenceReport {
    OverdampedParams base;
    StationaryEstimate langevin;
    std::vector<EquivalenceRow> rows;
};

EquivalenceReport error_free_equivalence(const OverdampedParams& op,
                                         const std::vector<double>& sigmas,
                                         const EquivalenceSettings& s, std::uint64_t seed);

}  // namespace cvfl
