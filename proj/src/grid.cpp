#include "cvfl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "cvfl/integrators.hpp"

namespace cvfl {

double GridField::mass() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s * spec.hx() * spec.hp();
}

void GridField::renormalize() {
    const double m = mass();
    if (!(m > 0.0) || !std::isfinite(m)) {
        throw Error(ErrorCode::integrity, "cannot renormalise a field with mass " +
                                              std::to_string(m));
    }
    const double inv = 1.0 / m;
    for (double& v : w) v *= inv;
}

GridField gaussian_field(const GridSpec& spec, double mean_x, double mean_p, double v_x,
                         double v_p, double c) {
    const double det = v_x * v_p - c * c;
    if (!(v_x > 0.0) || !(v_p > 0.0) || !(det > 0.0)) {
        throw Error(ErrorCode::parameter, "Gaussian field needs a positive-definite covariance");
    }
    GridField f(spec);
    for (std::size_t i = 0; i < spec.nx; ++i) {
        const double dx = spec.x(i) - mean_x;
        for (std::size_t j = 0; j < spec.np; ++j) {
            const double dp = spec.p(j) - mean_p;
            const double q = (v_p * dx * dx - 2.0 * c * dx * dp + v_x * dp * dp) / det;
            f.at(i, j) = std::exp(-0.5 * q);
        }
    }
    f.renormalize();
    return f;
}

// -----------------------------------------------------------------------------
// Coefficients
// -----------------------------------------------------------------------------

FpeCoefficients CoefficientModel::at(double t, double delayed_mean_x) const {
    FpeCoefficients co = base;
    if (scheme == Scheme::scheme2) {
        co.b_x -= k * reference(t, omega);
    } else if (scheme == Scheme::scheme1) {
        co.b_x -= k * delayed_mean_x;
    }
    return co;
}

CoefficientModel coefficients_for(MeasurementMode mode, const OscillatorParams& osc,
                                  const MeasurementParams& meas, const FeedbackConfig& fb) {
    MeasurementParams m = meas;
    m.mode = mode;
    const double k = fb.gain();
    if (k != 0.0 && !(m.gamma > 0.0 && m.efficiency(osc.hbar) > 0.0)) {
        throw Error(ErrorCode::divergent_feedback,
                    "feedback diffusion diverges without measurement");
    }
    const Couplings cp = couplings(osc, m);
    const double g = osc.mean_damping();

    CoefficientModel model;
    model.scheme = fb.scheme;
    model.k = k;
    model.omega = osc.omega;
    model.reference = fb.reference;

    FpeCoefficients& co = model.base;
    co.a_xx = -0.5 * g + k;
    co.a_xp = osc.omega;
    co.a_px = -osc.omega;
    co.a_pp = -0.5 * g;
    co.d_xx = cp.thermal + (k != 0.0 ? cp.feedback_diffusion(k, fb.scheme) : 0.0);
    co.d_pp = cp.thermal + cp.decoherence;
    co.d_xp = 0.0;
    return model;
}

StochasticAmplitudes stochastic_amplitudes(const OscillatorParams& osc,
                                           const MeasurementParams& meas, double k) {
    if (!(meas.gamma > 0.0)) return {};
    const Couplings cp = couplings(osc, meas);
    return {cp.backaction, k * cp.record_amplitude};
}

// -----------------------------------------------------------------------------
// Deterministic step
// -----------------------------------------------------------------------------

namespace {

inline double van_leer(double a, double b) {
    return a * b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
}

double max_abs_affine(double ax, double ap, double b, const GridSpec& s) {
    double m = 0.0;
    for (double x : {s.x_min, s.x_max})
        for (double p : {s.p_min, s.p_max}) m = std::max(m, std::abs(ax * x + ap * p + b));
    return m;
}

// Writes dW/dt into out. Flux form with zero flux through the outer faces.
void fpe_rhs(const GridSpec& g, const std::vector<double>& w, const FpeCoefficients& co,
             Advection adv, std::vector<double>& out, std::vector<double>& slope) {
    const std::size_t nx = g.nx, np = g.np;
    const double hx = g.hx(), hp = g.hp();
    const bool muscl = adv == Advection::muscl;
    std::fill(out.begin(), out.end(), 0.0);

    // x direction.
    if (muscl) {
        std::fill(slope.begin(), slope.end(), 0.0);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            const double* wm = &w[(i - 1) * np];
            const double* w0 = &w[i * np];
            const double* wp = &w[(i + 1) * np];
            double* s = &slope[i * np];
            for (std::size_t j = 0; j < np; ++j) s[j] = van_leer(w0[j] - wm[j], wp[j] - w0[j]);
        }
    }
    for (std::size_t f = 0; f + 1 < nx; ++f) {
        const double xf = g.x_min + static_cast<double>(f + 1) * hx;
        const double* wl = &w[f * np];
        const double* wr = &w[(f + 1) * np];
        const double* sl = muscl ? &slope[f * np] : nullptr;
        const double* sr = muscl ? &slope[(f + 1) * np] : nullptr;
        double* ol = &out[f * np];
        double* orr = &out[(f + 1) * np];
        const double base = co.a_xx * xf + co.b_x;
        for (std::size_t j = 0; j < np; ++j) {
            const double u = base + co.a_xp * g.p(j);
            double left = wl[j], right = wr[j];
            if (muscl) {
                left += 0.5 * sl[j];
                right -= 0.5 * sr[j];
            }
            const double flux =
                (u > 0.0 ? u * left : u * right) - 0.5 * co.d_xx * (wr[j] - wl[j]) / hx;
            ol[j] -= flux / hx;
            orr[j] += flux / hx;
        }
    }

    // p direction.
    for (std::size_t i = 0; i < nx; ++i) {
        const double* row = &w[i * np];
        double* o = &out[i * np];
        double* s = muscl ? &slope[i * np] : nullptr;
        if (muscl) {
            s[0] = 0.0;
            s[np - 1] = 0.0;
            for (std::size_t j = 1; j + 1 < np; ++j)
                s[j] = van_leer(row[j] - row[j - 1], row[j + 1] - row[j]);
        }
        const double base = co.a_px * g.x(i) + co.b_p;
        for (std::size_t f = 0; f + 1 < np; ++f) {
            const double pf = g.p_min + static_cast<double>(f + 1) * hp;
            const double u = base + co.a_pp * pf;
            double left = row[f], right = row[f + 1];
            if (muscl) {
                left += 0.5 * s[f];
                right -= 0.5 * s[f + 1];
            }
            const double flux =
                (u > 0.0 ? u * left : u * right) - 0.5 * co.d_pp * (row[f + 1] - row[f]) / hp;
            o[f] -= flux / hp;
            o[f + 1] += flux / hp;
        }
    }

    // Mixed diffusion, centred, interior only.
    if (co.d_xp != 0.0) {
        const double scale = co.d_xp / (4.0 * hx * hp);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            for (std::size_t j = 1; j + 1 < np; ++j) {
                out[i * np + j] += scale * (w[(i + 1) * np + j + 1] - w[(i + 1) * np + j - 1] -
                                            w[(i - 1) * np + j + 1] + w[(i - 1) * np + j - 1]);
            }
        }
    }
}

void require_stable(const GridSpec& spec, const FpeCoefficients& co, double dt) {
    const double limit = max_stable_step(spec, co);
    if (!(dt > 0.0) || dt > limit * (1.0 + 1e-12)) {
        throw Error(ErrorCode::step_size, "grid step dt = " + std::to_string(dt) +
                                              " exceeds the stability bound " +
                                              std::to_string(limit));
    }
}

void fpe_step_impl(GridField& field, const FpeCoefficients& co0, const FpeCoefficients& co1,
                   double dt, Advection advection) {
    require_stable(field.spec, co0, dt);
    require_stable(field.spec, co1, dt);
    const std::size_t n = field.w.size();
    std::vector<double> k1(n), slope(advection == Advection::muscl ? n : 0);
    fpe_rhs(field.spec, field.w, co0, advection, k1, slope);
    if (advection == Advection::upwind1) {
        for (std::size_t q = 0; q < n; ++q) field.w[q] += dt * k1[q];
        return;
    }
    std::vector<double> stage(n), k2(n);
    for (std::size_t q = 0; q < n; ++q) stage[q] = field.w[q] + dt * k1[q];
    fpe_rhs(field.spec, stage, co1, advection, k2, slope);
    for (std::size_t q = 0; q < n; ++q) field.w[q] += 0.5 * dt * (k1[q] + k2[q]);
}

}  // namespace

double max_stable_step(const GridSpec& spec, const FpeCoefficients& co) {
    double limit = kInfinity;
    const double ux = max_abs_affine(co.a_xx, co.a_xp, co.b_x, spec);
    const double up = max_abs_affine(co.a_px, co.a_pp, co.b_p, spec);
    if (ux > 0.0) limit = std::min(limit, spec.hx() / ux);
    if (up > 0.0) limit = std::min(limit, spec.hp() / up);
    if (co.d_xx > 0.0) limit = std::min(limit, spec.hx() * spec.hx() / (2.0 * co.d_xx));
    if (co.d_pp > 0.0) limit = std::min(limit, spec.hp() * spec.hp() / (2.0 * co.d_pp));
    return 0.4 * limit;
}

void fpe_step(GridField& field, const FpeCoefficients& co, double dt, Advection advection) {
    fpe_step_impl(field, co, co, dt, advection);
}

// -----------------------------------------------------------------------------
// Stochastic updates
// -----------------------------------------------------------------------------

namespace {

double grid_mean_x(const GridField& f) {
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < f.spec.nx; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < f.spec.np; ++j) row += f.at(i, j);
        s0 += row;
        s1 += f.spec.x(i) * row;
    }
    return s1 / s0;
}

// Centred x-derivative with zero values outside the grid.
void d_dx(const GridField& f, const std::vector<double>& w, std::vector<double>& out) {
    const std::size_t nx = f.spec.nx, np = f.spec.np;
    const double inv = 1.0 / (2.0 * f.spec.hx());
    for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < np; ++j) {
            const double up = i + 1 < nx ? w[(i + 1) * np + j] : 0.0;
            const double dn = i > 0 ? w[(i - 1) * np + j] : 0.0;
            out[i * np + j] = (up - dn) * inv;
        }
    }
}

}  // namespace

void measurement_update(GridField& field, double dW, double amplitude) {
    if (dW == 0.0 || amplitude == 0.0) return;
    const double m = grid_mean_x(field);
    for (std::size_t i = 0; i < field.spec.nx; ++i) {
        const double factor = amplitude * dW * (field.spec.x(i) - m);
        for (std::size_t j = 0; j < field.spec.np; ++j) field.at(i, j) += factor * field.at(i, j);
    }
}

void feedback_noise_update(GridField& field, double noise, double shift) {
    if (noise == 0.0 || shift == 0.0) return;
    std::vector<double> dx(field.w.size());
    d_dx(field, field.w, dx);
    const double s = shift * noise;
    for (std::size_t q = 0; q < field.w.size(); ++q) field.w[q] -= s * dx[q];
}

void milstein_update(GridField& field, const StochasticAmplitudes& amp, double dW, double dt,
                     double extra_shift_noise) {
    const GridSpec& g = field.spec;
    const std::size_t n = field.w.size();
    const double a = amp.measurement;
    const double c = amp.shift;
    const double cell = g.hx() * g.hp();
    const double mass = field.mass();
    const double m = grid_mean_x(field);

    // g(W) = a (x - m) W - c dW/dx
    std::vector<double> gw(n), deriv(n);
    d_dx(field, field.w, deriv);
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double ax = a * (g.x(i) - m);
        for (std::size_t j = 0; j < g.np; ++j) {
            const std::size_t q = i * g.np + j;
            gw[q] = ax * field.w[q] - c * deriv[q];
        }
    }

    // Derivative of g along g. The mean depends on W, so besides G(g) there
    // is the term -a (dm[g]) W with dm[g] = (sum x g - m sum g) / mass.
    double sx = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < g.np; ++j) row += gw[i * g.np + j];
        s0 += row;
        sx += g.x(i) * row;
    }
    const double dm = (sx - m * s0) * cell / mass;

    std::vector<double> dg(n);
    d_dx(field, gw, dg);
    const double second = 0.5 * (dW * dW - dt);
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double ax = a * (g.x(i) - m);
        for (std::size_t j = 0; j < g.np; ++j) {
            const std::size_t q = i * g.np + j;
            const double gg = ax * gw[q] - c * dg[q] - a * dm * field.w[q];
            field.w[q] += gw[q] * dW + gg * second - c * extra_shift_noise * deriv[q];
        }
    }
}

// -----------------------------------------------------------------------------
// Moments
// -----------------------------------------------------------------------------

double GridMoments::max_third_cumulant() const {
    return std::max({std::abs(k30), std::abs(k21), std::abs(k12), std::abs(k03)});
}

GridMoments moments(const GridField& field) {
    const GridSpec& g = field.spec;
    const double cell = g.hx() * g.hp();
    GridMoments mo;
    double s0 = 0.0, sx = 0.0, sp = 0.0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        for (std::size_t j = 0; j < g.np; ++j) {
            const double v = field.at(i, j);
            s0 += v;
            sx += g.x(i) * v;
            sp += g.p(j) * v;
        }
    }
    mo.mass = s0 * cell;
    if (!(std::abs(mo.mass - 1.0) <= 1e-3)) {
        throw Error(ErrorCode::integrity,
                    "field mass " + std::to_string(mo.mass) + " deviates from 1");
    }
    mo.mean_x = sx / s0;
    mo.mean_p = sp / s0;

    double xx = 0, pp = 0, xp = 0, x3 = 0, x2p = 0, xp2 = 0, p3 = 0;
    for (std::size_t i = 0; i < g.nx; ++i) {
        const double dx = g.x(i) - mo.mean_x;
        for (std::size_t j = 0; j < g.np; ++j) {
            const double dp = g.p(j) - mo.mean_p;
            const double v = field.at(i, j);
            xx += dx * dx * v;
            pp += dp * dp * v;
            xp += dx * dp * v;
            x3 += dx * dx * dx * v;
            x2p += dx * dx * dp * v;
            xp2 += dx * dp * dp * v;
            p3 += dp * dp * dp * v;
        }
    }
    mo.v_x = xx / s0;
    mo.v_p = pp / s0;
    mo.c = xp / s0;
    mo.k30 = x3 / s0;
    mo.k21 = x2p / s0;
    mo.k12 = xp2 / s0;
    mo.k03 = p3 / s0;
    return mo;
}

// -----------------------------------------------------------------------------
// Composite evolution
// -----------------------------------------------------------------------------

GridEvolver::GridEvolver(const GridRunConfig& cfg, GridField initial)
    : cfg_(cfg),
      model_(coefficients_for(cfg.meas.mode, cfg.osc, cfg.meas, cfg.fb)),
      amp_(stochastic_amplitudes(cfg.osc, cfg.meas, cfg.fb.gain())),
      field_(std::move(initial)) {
    if (field_.spec.size() != field_.w.size()) {
        throw Error(ErrorCode::shape, "grid field size does not match its spec");
    }
    field_.renormalize();
    mean_x_ = grid_mean_x(field_);

    // Bound the time-dependent offset over the whole run for the default step.
    FpeCoefficients worst = model_.base;
    const double k = std::abs(model_.k);
    if (model_.scheme == Scheme::scheme2) {
        worst.b_x += k * std::abs(model_.reference.y0);
    } else if (model_.scheme == Scheme::scheme1) {
        worst.b_x += k * std::max(std::abs(field_.spec.x_min), std::abs(field_.spec.x_max));
    }
    dt_ = cfg.dt > 0.0 ? cfg.dt : 0.9 * max_stable_step(field_.spec, worst);

    if (model_.scheme == Scheme::scheme1) {
        const double n = std::ceil(cfg.fb.tau / dt_ - 1e-9);
        dt_ = cfg.fb.tau / n;
        lag_ = delay_steps(cfg.fb.tau, dt_);
        mean_history_ = DelayLine(lag_, mean_x_);
    }
}

void GridEvolver::step(double dW, double dW_tau) {
    double delayed = 0.0;
    if (model_.scheme == Scheme::scheme1) {
        delayed = mean_history_.delayed();
        mean_history_.push(mean_x_);
    }
    const auto co0 = model_.at(t_, delayed);
    const auto co1 = model_.at(t_ + dt_, delayed);
    fpe_step_impl(field_, co0, co1, dt_, cfg_.advection);

    if (cfg_.conditional && cfg_.meas.gamma > 0.0) {
        const bool scheme1 = model_.scheme == Scheme::scheme1;
        if (cfg_.stochastic == StochasticScheme::milstein) {
            milstein_update(field_, amp_, dW, dt_, scheme1 ? -dW_tau : 0.0);
        } else {
            measurement_update(field_, dW, amp_.measurement);
            feedback_noise_update(field_, scheme1 ? dW - dW_tau : dW, amp_.shift);
        }
    }

    max_mass_defect_ = std::max(max_mass_defect_, std::abs(field_.mass() - 1.0));
    if (cfg_.meas.mode == MeasurementMode::classical) {
        std::size_t clamped = 0;
        for (double& v : field_.w) {
            if (v < -1e-12) {
                v = 0.0;
                ++clamped;
            }
        }
        if (clamped > 0) {
            clamped_ += clamped;
            if (!warned_) {
                std::clog << "warning: clamped " << clamped
                          << " negative cells of a classical density at t = " << t_ + dt_
                          << "\n";
                warned_ = true;
            }
        }
    }
    field_.renormalize();
    mean_x_ = grid_mean_x(field_);
    t_ += dt_;
    ++steps_;
}

const char* to_string(Advection a) {
    return a == Advection::upwind1 ? "upwind1" : "muscl";
}

const char* to_string(StochasticScheme s) {
    return s == StochasticScheme::euler ? "euler" : "milstein";
}

Advection parse_advection(const std::string& s) {
    if (s == "upwind1") return Advection::upwind1;
    if (s == "muscl") return Advection::muscl;
    throw Error(ErrorCode::configuration, "unknown advection scheme '" + s + "'");
}

StochasticScheme parse_stochastic_scheme(const std::string& s) {
    if (s == "euler") return StochasticScheme::euler;
    if (s == "milstein") return StochasticScheme::milstein;
    throw Error(ErrorCode::configuration, "unknown stochastic scheme '" + s + "'");
}

}  // namespace cvfl
