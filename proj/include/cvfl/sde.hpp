#pragma once

// Ito integration of conditional means under continuous position measurement
// and either feedback loop. Covariances are deterministic under Gaussian
// closure, so they are integrated once per parameter set and shared by every
// trajectory.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvfl/model.hpp"
#include "cvfl/moments.hpp"

namespace cvfl {

/// dI = xc dt + record_amplitude dW. Throws Error(no_measurement) for gamma = 0.
double measurement_increment(double xc, const MeasurementParams& meas,
                             const OscillatorParams& osc, double dt, double dW);

/// Euler-Maruyama step of the Scheme I conditional means. x_tau is the
/// conditional mean position one delay earlier, dW_tau the increment drawn
/// one delay earlier.
MeanState step_scheme1(const MeanState& m, const CovState& cv, const OscillatorParams& osc,
                       const MeasurementParams& meas, double k, double dW, double dW_tau,
                       double x_tau, double dt);

/// Euler-Maruyama step of the Scheme II conditional means at time t. With
/// fb.scheme == none this is the measured oscillator without feedback.
MeanState step_scheme2(const MeanState& m, const CovState& cv, const OscillatorParams& osc,
                       const MeasurementParams& meas, const FeedbackConfig& fb, double t,
                       double dW, double dt);

struct SdeConfig {
    OscillatorParams osc;
    MeasurementParams meas;
    FeedbackConfig fb;
    MeanState initial{1.0, 0.0};
    CovState initial_cov{0.5, 0.5, 0.0};
    double t_end = 20.0;
    double dt = 0.0;                ///< 0 selects default_sde_step
    std::size_t record_stride = 1;  ///< keep every n-th step

    double step() const;
    std::size_t steps() const;
    std::size_t lag_steps() const;  ///< tau / dt for Scheme I, else 0
};

/// min(tau / 256, 2 pi / (2048 omega)), shrunk further so that tau / dt is an
/// integer when a delay is present.
double default_sde_step(const FeedbackConfig& fb, double omega);

/// Conditional covariances on the SDE step grid, with the Heisenberg monitor.
struct CovariancePath {
    std::vector<CovState> cov;  ///< one entry per step, index 0 at t = 0
    double min_uncertainty = 0.0;  ///< min over time of Vx Vp - C^2
    std::size_t min_uncertainty_step = 0;
    bool uncertainty_ok = true;  ///< quantum mode: min >= hbar^2/4 (1 - 1e-6)
};

CovariancePath precompute_covariances(const SdeConfig& cfg);

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> dI;  ///< record increment summed over each stride; empty if gamma = 0

    // Running sums for the delayed-noise orthogonality check (Scheme I).
    double sum_dw_dwtau = 0.0;
    double sum_dw2 = 0.0;
    double sum_dwtau2 = 0.0;
    std::size_t noise_pairs = 0;
};

TrajectoryRecord run_trajectory(const SdeConfig& cfg, const CovariancePath& cov,
                                std::uint64_t seed, std::uint64_t stream_id);

/// Runs stream ids 0..n-1 on up to `workers` threads. The result is ordered
/// by stream id and independent of the worker count.
std::vector<TrajectoryRecord> run_ensemble(const SdeConfig& cfg, const CovariancePath& cov,
                                           std::uint64_t seed, std::size_t n,
                                           unsigned workers = 1);

struct EnsembleStats {
    std::vector<double> t;
    std::vector<double> mean_x, sem_x, var_x;
    std::vector<double> mean_p, sem_p, var_p;
    std::size_t n = 0;
};

/// Per-time mean, unbiased variance, and standard error of (x_c, p_c).
/// Reduction runs in stream-id order with compensated summation.
EnsembleStats ensemble_stats(const std::vector<TrajectoryRecord>& records);

/// Sample correlation of dW with dW_tau pooled over all records.
double pooled_noise_correlation(const std::vector<TrajectoryRecord>& records,
                                std::size_t* pairs = nullptr);

}  // namespace cvfl
