#include "cvfl/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "cvfl/parallel.hpp"
#include "cvfl/rng.hpp"

namespace cvfl {

namespace {

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            carry += (sum - t) + v;
        else
            carry += (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

void require_measurement(const MeasurementParams& meas) {
    if (!(meas.gamma > 0.0)) {
        throw Error(ErrorCode::no_measurement, "measurement record requires gamma > 0");
    }
}

}  // namespace

double measurement_increment(double xc, const MeasurementParams& meas,
                             const OscillatorParams& osc, double dt, double dW) {
    require_measurement(meas);
    return xc * dt + record_noise_amplitude(meas, osc.hbar) * dW;
}

MeanState step_scheme1(const MeanState& m, const CovState& cv, const OscillatorParams& osc,
                       const MeasurementParams& meas, double k, double dW, double dW_tau,
                       double x_tau, double dt) {
    const auto drift = scheme1_mean_rhs(m, x_tau, osc, k);
    const Couplings cp = couplings(osc, meas);
    double noise_x = cp.backaction * cv.v_x * dW;
    if (k != 0.0) {
        if (!(meas.gamma > 0.0)) {
            throw Error(ErrorCode::divergent_feedback, "Scheme I feedback needs gamma > 0");
        }
        noise_x += k * cp.record_amplitude * (dW - dW_tau);
    }
    return {m.x + drift[0] * dt + noise_x, m.p + drift[1] * dt + cp.backaction * cv.c * dW};
}

MeanState step_scheme2(const MeanState& m, const CovState& cv, const OscillatorParams& osc,
                       const MeasurementParams& meas, const FeedbackConfig& fb, double t,
                       double dW, double dt) {
    const auto drift = scheme2_mean_rhs(m, t, osc, fb);
    const Couplings cp = couplings(osc, meas);
    const double k = fb.gain();
    double amp_x = cp.backaction * cv.v_x;
    if (k != 0.0) {
        if (!(meas.gamma > 0.0)) {
            throw Error(ErrorCode::divergent_feedback, "Scheme II feedback needs gamma > 0");
        }
        amp_x += k * cp.record_amplitude;
    }
    return {m.x + drift[0] * dt + amp_x * dW, m.p + drift[1] * dt + cp.backaction * cv.c * dW};
}

// -----------------------------------------------------------------------------

double default_sde_step(const FeedbackConfig& fb, double omega) {
    const double base = 2.0 * std::numbers::pi / (2048.0 * omega);
    if (fb.scheme != Scheme::scheme1) return base;
    const double n = std::max(256.0, std::ceil(fb.tau / base - 1e-9));
    return fb.tau / n;
}

double SdeConfig::step() const { return dt > 0.0 ? dt : default_sde_step(fb, osc.omega); }

std::size_t SdeConfig::steps() const {
    const double h = step();
    if (!(t_end > 0.0)) throw Error(ErrorCode::configuration, "t_end must be positive");
    const double ratio = t_end / h;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio))
        return static_cast<std::size_t>(rounded);
    return static_cast<std::size_t>(std::ceil(ratio));
}

std::size_t SdeConfig::lag_steps() const {
    return fb.scheme == Scheme::scheme1 ? delay_steps(fb.tau, step()) : 0;
}

CovariancePath precompute_covariances(const SdeConfig& cfg) {
    const double h = cfg.step();
    const std::size_t n = cfg.steps();
    CovariancePath out;
    out.cov.reserve(n + 1);
    out.cov.push_back(cfg.initial_cov);

    auto rhs = [&](double, const StateVec<3>& s) {
        return conditional_cov_rhs(CovState::from(s), cfg.osc, cfg.meas);
    };
    StateVec<3> y = cfg.initial_cov.vec();
    for (std::size_t i = 0; i < n; ++i) {
        y = rk4_step<3>(rhs, static_cast<double>(i) * h, y, h);
        detail::require_finite(y, static_cast<double>(i + 1) * h);
        out.cov.push_back(CovState::from(y));
    }

    out.min_uncertainty = out.cov[0].determinant();
    for (std::size_t i = 1; i < out.cov.size(); ++i) {
        const double d = out.cov[i].determinant();
        if (d < out.min_uncertainty) {
            out.min_uncertainty = d;
            out.min_uncertainty_step = i;
        }
    }
    if (cfg.meas.mode == MeasurementMode::quantum) {
        const double bound = cfg.osc.hbar * cfg.osc.hbar / 4.0;
        out.uncertainty_ok = out.min_uncertainty >= bound * (1.0 - 1e-6);
    }
    return out;
}

TrajectoryRecord run_trajectory(const SdeConfig& cfg, const CovariancePath& cov,
                                std::uint64_t seed, std::uint64_t stream_id) {
    const double h = cfg.step();
    const std::size_t n = cfg.steps();
    const std::size_t lag = cfg.lag_steps();
    const std::size_t stride = std::max<std::size_t>(1, cfg.record_stride);
    if (cov.cov.size() < n + 1) {
        throw Error(ErrorCode::configuration, "covariance path shorter than the trajectory");
    }
    const bool scheme1 = cfg.fb.scheme == Scheme::scheme1;
    const bool has_record = cfg.meas.gamma > 0.0;
    const double k = cfg.fb.gain();
    const double record_amp = has_record ? record_noise_amplitude(cfg.meas, cfg.osc.hbar) : 0.0;

    NoiseStream noise(seed, stream_id, h, lag);
    DelayLine x_history = scheme1 ? DelayLine(lag, cfg.initial.x) : DelayLine();

    TrajectoryRecord rec;
    rec.seed = seed;
    rec.stream_id = stream_id;
    const std::size_t samples = n / stride + 2;
    rec.t.reserve(samples);
    rec.x.reserve(samples);
    rec.p.reserve(samples);
    rec.t.push_back(0.0);
    rec.x.push_back(cfg.initial.x);
    rec.p.push_back(cfg.initial.p);
    if (has_record) {
        rec.dI.reserve(samples);
        rec.dI.push_back(0.0);
    }

    MeanState m = cfg.initial;
    double dI_acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * h;
        const auto draw = noise.next();
        if (has_record) dI_acc += m.x * h + record_amp * draw.dW;

        if (scheme1) {
            const double x_tau = x_history.delayed();
            x_history.push(m.x);
            if (i >= lag) {
                rec.sum_dw_dwtau += draw.dW * draw.dW_delayed;
                rec.sum_dw2 += draw.dW * draw.dW;
                rec.sum_dwtau2 += draw.dW_delayed * draw.dW_delayed;
                ++rec.noise_pairs;
            }
            m = step_scheme1(m, cov.cov[i], cfg.osc, cfg.meas, k, draw.dW, draw.dW_delayed,
                             x_tau, h);
        } else {
            m = step_scheme2(m, cov.cov[i], cfg.osc, cfg.meas, cfg.fb, t, draw.dW, h);
        }
        if (!std::isfinite(m.x) || !std::isfinite(m.p)) {
            throw Error(ErrorCode::divergence,
                        "trajectory " + std::to_string(stream_id) +
                            " diverged at step " + std::to_string(i + 1));
        }
        if ((i + 1) % stride == 0 || i + 1 == n) {
            rec.t.push_back(static_cast<double>(i + 1) * h);
            rec.x.push_back(m.x);
            rec.p.push_back(m.p);
            if (has_record) {
                rec.dI.push_back(dI_acc);
                dI_acc = 0.0;
            }
        }
    }
    return rec;
}

std::vector<TrajectoryRecord> run_ensemble(const SdeConfig& cfg, const CovariancePath& cov,
                                           std::uint64_t seed, std::size_t n,
                                           unsigned workers) {
    std::vector<TrajectoryRecord> out(n);
    parallel_for(n, workers, [&](std::size_t i) {
        out[i] = run_trajectory(cfg, cov, seed, static_cast<std::uint64_t>(i));
    });
    return out;
}

EnsembleStats ensemble_stats(const std::vector<TrajectoryRecord>& records) {
    if (records.size() < 2) {
        throw Error(ErrorCode::shape, "ensemble statistics need at least two records");
    }
    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].stream_id < records[b].stream_id;
    });

    const auto& t = records[order[0]].t;
    for (const auto& r : records) {
        if (r.t.size() != t.size() || r.x.size() != t.size() || r.p.size() != t.size()) {
            throw Error(ErrorCode::shape, "records have mismatched time grids");
        }
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (r.t[j] != t[j]) throw Error(ErrorCode::shape, "records have mismatched times");
        }
    }

    EnsembleStats s;
    s.t = t;
    s.n = records.size();
    const auto m = t.size();
    const double n = static_cast<double>(records.size());
    for (auto* v : {&s.mean_x, &s.sem_x, &s.var_x, &s.mean_p, &s.sem_p, &s.var_p})
        v->resize(m);

    auto reduce = [&](const std::vector<double> TrajectoryRecord::*field, std::size_t j,
                      double& mean, double& var) {
        CompensatedSum sum;
        for (auto idx : order) sum.add((records[idx].*field)[j]);
        mean = sum.value() / n;
        CompensatedSum sq;
        CompensatedSum dev;
        for (auto idx : order) {
            const double d = (records[idx].*field)[j] - mean;
            sq.add(d * d);
            dev.add(d);
        }
        // Corrected two-pass formula absorbs the rounding left in the mean.
        var = (sq.value() - dev.value() * dev.value() / n) / (n - 1.0);
        var = std::max(var, 0.0);
    };

    for (std::size_t j = 0; j < m; ++j) {
        reduce(&TrajectoryRecord::x, j, s.mean_x[j], s.var_x[j]);
        reduce(&TrajectoryRecord::p, j, s.mean_p[j], s.var_p[j]);
        s.sem_x[j] = std::sqrt(s.var_x[j] / n);
        s.sem_p[j] = std::sqrt(s.var_p[j] / n);
    }
    return s;
}

double pooled_noise_correlation(const std::vector<TrajectoryRecord>& records,
                                std::size_t* pairs) {
    CompensatedSum cross, a2, b2;
    std::size_t total = 0;
    for (const auto& r : records) {
        cross.add(r.sum_dw_dwtau);
        a2.add(r.sum_dw2);
        b2.add(r.sum_dwtau2);
        total += r.noise_pairs;
    }
    if (pairs) *pairs = total;
    const double denom = std::sqrt(a2.value() * b2.value());
    return denom > 0.0 ? cross.value() / denom : 0.0;
}

}  // namespace cvfl
