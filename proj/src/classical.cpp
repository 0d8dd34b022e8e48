#include "cvfl/classical.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "cvfl/parallel.hpp"
#include "cvfl/rng.hpp"

namespace cvfl {

FpeCoefficients classical_free_coefficients(const OscillatorParams& osc) {
    FpeCoefficients co;
    const double g = osc.mean_damping();
    co.a_xx = -0.5 * g;
    co.a_xp = osc.omega;
    co.a_px = -osc.omega;
    co.a_pp = -0.5 * g;
    const double d = std::isinf(osc.beta) ? 0.0 : osc.kappa / (osc.beta * osc.omega);
    co.d_xx = d;
    co.d_pp = d;
    return co;
}

void require_valid(const OverdampedParams& op) {
    std::string bad;
    if (!(op.kappa > 0.0)) bad += " kappa";
    if (!(op.T >= 0.0)) bad += " T";
    if (!(op.gamma > 0.0)) bad += " gamma";
    if (!(op.sigma > 0.0)) bad += " sigma";
    if (!(op.potential.a > 0.0)) bad += " a";
    if (!bad.empty()) {
        throw Error(ErrorCode::parameter, "overdamped parameters out of range:" + bad);
    }
}

double conditional_variance_rhs(double v, const OverdampedParams& op) {
    const double a = op.potential.a;
    return 4.0 * op.T / op.kappa - 4.0 * a / op.kappa * v - 2.0 * op.gamma / op.sigma * v * v;
}

double steady_conditional_variance(const OverdampedParams& op) {
    require_valid(op);
    const double a = op.potential.a;
    const double r = 2.0 * op.T * op.gamma * op.kappa / (a * a * op.sigma);
    // sqrt(1 + r) - 1 loses digits for small r.
    return a * op.sigma / (op.gamma * op.kappa) * r / (std::sqrt(1.0 + r) + 1.0);
}

double integrate_conditional_variance(const OverdampedParams& op, double v0, double dt,
                                      double tol) {
    require_valid(op);
    double v = v0;
    auto f = [&](double y) { return conditional_variance_rhs(y, op); };
    for (long i = 0; i < 100'000'000L; ++i) {
        const double k1 = f(v);
        if (std::abs(k1) < tol) break;
        const double k2 = f(v + 0.5 * dt * k1);
        const double k3 = f(v + 0.5 * dt * k2);
        const double k4 = f(v + dt * k3);
        v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::divergence, "conditional variance diverged");
        }
    }
    return v;
}

ConditionalGaussian1D overdamped_conditional_step(const ConditionalGaussian1D& s, double dW,
                                                  const OverdampedParams& op, double dt) {
    if (!(op.sigma > 0.0)) throw Error(ErrorCode::parameter, "sigma must be positive");
    ConditionalGaussian1D out;
    out.m = s.m - 2.0 / op.kappa * op.potential.slope(s.m) * dt +
            std::sqrt(2.0 * op.gamma / op.sigma) * s.v * dW;
    auto f = [&](double y) { return conditional_variance_rhs(y, op); };
    const double k1 = f(s.v);
    const double k2 = f(s.v + 0.5 * dt * k1);
    const double k3 = f(s.v + 0.5 * dt * k2);
    const double k4 = f(s.v + dt * k3);
    out.v = s.v + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    return out;
}

double langevin_step(double x, const OverdampedParams& op, double dW, double dt) {
    return x - 2.0 / op.kappa * op.potential.slope(x) * dt + std::sqrt(4.0 * op.T / op.kappa) * dW;
}

// -----------------------------------------------------------------------------

OverdampedDensity::OverdampedDensity(const OverdampedParams& op, std::size_t n, double x_min,
                                     double x_max, double mean, double variance)
    : op_(op), n_(n), x_min_(x_min), h_((x_max - x_min) / static_cast<double>(n)),
      p_(n), scratch_(n) {
    require_valid(op);
    if (n < 3 || !(x_max > x_min) || !(variance > 0.0)) {
        throw Error(ErrorCode::configuration, "bad 1D density grid");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double d = x(i) - mean;
        p_[i] = std::exp(-0.5 * d * d / variance);
        s += p_[i];
    }
    for (double& v : p_) v /= s * h_;
}

double OverdampedDensity::max_stable_step() const {
    const double vmax = 2.0 / op_.kappa *
                        std::max(std::abs(op_.potential.slope(x_min_)),
                                 std::abs(op_.potential.slope(x_min_ + n_ * h_)));
    const double d = 2.0 * op_.T / op_.kappa;
    double limit = vmax > 0.0 ? h_ / vmax : kInfinity;
    if (d > 0.0) limit = std::min(limit, h_ * h_ / (2.0 * d));
    return 0.4 * limit;
}

void OverdampedDensity::step(double dW, double dt) {
    if (dt > max_stable_step() * (1.0 + 1e-12)) {
        throw Error(ErrorCode::step_size, "1D density step exceeds the stability bound");
    }
    // Deterministic part in flux form with zero outer flux. Central drift
    // flux while the cell Peclet number allows it, upwind otherwise.
    const double d = 2.0 * op_.T / op_.kappa;
    std::fill(scratch_.begin(), scratch_.end(), 0.0);
    for (std::size_t f = 0; f + 1 < n_; ++f) {
        const double xf = x_min_ + static_cast<double>(f + 1) * h_;
        const double u = -2.0 / op_.kappa * op_.potential.slope(xf);
        const double adv = std::abs(u) * h_ < 2.0 * d ? 0.5 * u * (p_[f] + p_[f + 1])
                           : (u > 0.0 ? u * p_[f] : u * p_[f + 1]);
        const double flux = adv - d * (p_[f + 1] - p_[f]) / h_;
        scratch_[f] -= flux / h_;
        scratch_[f + 1] += flux / h_;
    }
    for (std::size_t i = 0; i < n_; ++i) p_[i] += dt * scratch_[i];

    // Measurement with the (dW^2 - dt) correction of the multiplicative term.
    const double a = std::sqrt(2.0 * op_.gamma / op_.sigma);
    const double m = mean();
    const double mass_now = mass();
    double sx = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        scratch_[i] = a * (x(i) - m) * p_[i];
        s0 += scratch_[i];
        sx += x(i) * scratch_[i];
    }
    const double dm = (sx - m * s0) * h_ / mass_now;
    const double second = 0.5 * (dW * dW - dt);
    for (std::size_t i = 0; i < n_; ++i) {
        const double g = scratch_[i];
        const double gg = a * (x(i) - m) * g - a * dm * p_[i];
        p_[i] += g * dW + gg * second;
        if (p_[i] < 0.0) p_[i] = 0.0;
    }
    const double total = mass();
    for (double& v : p_) v /= total;
}

double OverdampedDensity::mass() const {
    double s = 0.0;
    for (double v : p_) s += v;
    return s * h_;
}

double OverdampedDensity::mean() const {
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        s0 += p_[i];
        s1 += x(i) * p_[i];
    }
    return s1 / s0;
}

double OverdampedDensity::variance() const {
    const double m = mean();
    double s0 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        s0 += p_[i];
        s2 += (x(i) - m) * (x(i) - m) * p_[i];
    }
    return s2 / s0;
}

double density_steady_variance(const OverdampedParams& op, std::uint64_t seed, double t_end,
                               std::size_t n, double half_width) {
    const double center = op.potential.minimum();
    OverdampedDensity dens(op, n, center - half_width, center + half_width, center,
                           op.equilibrium_variance());
    const double dt_max = 0.9 * dens.max_stable_step();
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt_max));
    const double dt = t_end / static_cast<double>(steps);
    NoiseStream noise(seed, 0, dt, 0, 11);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < steps; ++i) {
        dens.step(noise.next().dW, dt);
        if (2 * (i + 1) > steps) {
            acc += dens.variance();
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

// -----------------------------------------------------------------------------

namespace {

// Stationary statistics of an ensemble of scalar paths generated by
// `advance(state, dW, dt)` from x0.
template <class Advance>
StationaryEstimate stationary_statistics(const EquivalenceSettings& s, double x0,
                                         std::uint64_t seed, std::uint32_t channel,
                                         Advance advance) {
    const std::size_t n_traj = s.trajectories;
    const auto burn = static_cast<std::size_t>(std::llround(s.burn_in / s.dt));
    const auto every = std::max<std::size_t>(1, std::llround(s.sample_every / s.dt));
    const auto lag_samples =
        std::max<std::size_t>(1, std::llround(s.lag / (static_cast<double>(every) * s.dt)));
    const std::size_t total_steps = burn + every * s.samples;

    std::vector<std::vector<double>> samples(n_traj);
    parallel_for(n_traj, s.workers, [&](std::size_t id) {
        NoiseStream noise(seed, id, s.dt, 0, channel);
        double x = x0;
        auto& out = samples[id];
        out.reserve(s.samples);
        for (std::size_t step = 1; step <= total_steps; ++step) {
            x = advance(x, noise.next().dW, s.dt);
            if (step > burn && (step - burn) % every == 0) out.push_back(x);
        }
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::divergence, "stationary ensemble diverged");
        }
    });

    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& v : samples)
        for (double x : v) {
            sum += x;
            ++count;
        }
    const double mu = sum / static_cast<double>(count);

    // Each trajectory contributes one batch value; trajectories are
    // independent, so the spread of batch values gives the standard error.
    std::vector<double> batch(n_traj);
    double var_sum = 0.0, lag_sum = 0.0;
    std::size_t lag_count = 0;
    for (std::size_t id = 0; id < n_traj; ++id) {
        const auto& v = samples[id];
        double b = 0.0;
        for (std::size_t q = 0; q < v.size(); ++q) {
            b += (v[q] - mu) * (v[q] - mu);
            if (q + lag_samples < v.size()) {
                lag_sum += (v[q] - mu) * (v[q + lag_samples] - mu);
                ++lag_count;
            }
        }
        batch[id] = b / static_cast<double>(v.size());
        var_sum += b;
    }
    StationaryEstimate est;
    est.samples = count;
    est.variance = var_sum / static_cast<double>(count - 1);
    double bm = 0.0;
    for (double b : batch) bm += b;
    bm /= static_cast<double>(n_traj);
    double bv = 0.0;
    for (double b : batch) bv += (b - bm) * (b - bm);
    bv /= static_cast<double>(n_traj - 1);
    est.variance_se = std::sqrt(bv / static_cast<double>(n_traj));
    est.autocorrelation = lag_sum / static_cast<double>(lag_count) / est.variance;
    return est;
}

}  // namespace

StationaryEstimate conditional_mean_statistics(const OverdampedParams& op,
                                               const EquivalenceSettings& s,
                                               std::uint64_t seed) {
    require_valid(op);
    const double v = steady_conditional_variance(op);
    // Distinct sigma values draw from distinct channels.
    const auto bits = std::bit_cast<std::uint64_t>(op.sigma);
    const auto channel = static_cast<std::uint32_t>(1 + ((bits ^ (bits >> 32)) & 0xffffu));
    return stationary_statistics(s, op.potential.minimum(), seed, channel,
                                 [&](double m, double dW, double dt) {
                                     return overdamped_conditional_step({m, v}, dW, op, dt).m;
                                 });
}

StationaryEstimate langevin_statistics(const OverdampedParams& op,
                                       const EquivalenceSettings& s, std::uint64_t seed) {
    require_valid(op);
    return stationary_statistics(s, op.potential.minimum(), seed, 0x10000u,
                                 [&](double x, double dW, double dt) {
                                     return langevin_step(x, op, dW, dt);
                                 });
}

EquivalenceReport error_free_equivalence(const OverdampedParams& op,
                                         const std::vector<double>& sigmas,
                                         const EquivalenceSettings& s, std::uint64_t seed) {
    require_valid(op);
    EquivalenceReport rep;
    rep.base = op;
    rep.langevin = langevin_statistics(op, s, seed);
    const double target = op.equilibrium_variance();
    for (double sigma : sigmas) {
        OverdampedParams o = op;
        o.sigma = sigma;
        EquivalenceRow row;
        row.sigma = sigma;
        row.v_c_closed = steady_conditional_variance(o);
        row.v_c_numeric = integrate_conditional_variance(o, target, 1e-3);
        row.mean_stats = conditional_mean_statistics(o, s, seed);
        row.total_variance = row.mean_stats.variance + row.v_c_closed;
        row.total_z = (row.total_variance - target) / row.mean_stats.variance_se;
        row.variance_mismatch = std::abs(row.mean_stats.variance - rep.langevin.variance);
        row.autocorrelation_mismatch =
            std::abs(row.mean_stats.autocorrelation - rep.langevin.autocorrelation);
        rep.rows.push_back(row);
    }
    return rep;
}

}  // namespace cvfl
