#include "cvfl/stability.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvfl/integrators.hpp"
#include "cvfl/moments.hpp"
#include "cvfl/parallel.hpp"

namespace cvfl {

Complex char_fn(Complex lambda, const CharacteristicProblem& cp) {
    const Complex s = lambda + 0.5 * cp.kappa;
    return s * (s - cp.k * (1.0 - std::exp(-lambda * cp.tau))) + cp.omega * cp.omega;
}

Complex char_fn_derivative(Complex lambda, const CharacteristicProblem& cp) {
    const Complex s = lambda + 0.5 * cp.kappa;
    const Complex e = std::exp(-lambda * cp.tau);
    return (s - cp.k * (1.0 - e)) + s * (1.0 - cp.k * cp.tau * e);
}

namespace {

constexpr int kSeeds = 20;
constexpr double kMergeDistance = 1e-6;
constexpr double kResidualTol = 1e-10;

bool newton(const CharacteristicProblem& cp, Complex& z) {
    for (int it = 0; it < 100; ++it) {
        const Complex f = char_fn(z, cp);
        const Complex df = char_fn_derivative(z, cp);
        if (!std::isfinite(f.real()) || !std::isfinite(f.imag()) || std::abs(df) == 0.0)
            return false;
        const Complex step = f / df;
        z -= step;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    return std::abs(char_fn(z, cp)) <= kResidualTol;
}

}  // namespace

std::vector<Complex> characteristic_roots(const CharacteristicProblem& cp) {
    const double re_lo = -2.0 * cp.kappa - cp.k;
    const double re_hi = cp.k + cp.kappa;
    const double im_hi = cp.omega + 2.0 * std::numbers::pi / cp.tau;
    std::vector<Complex> roots;
    auto add = [&](Complex z) {
        for (const auto& r : roots)
            if (std::abs(r - z) < kMergeDistance) return;
        roots.push_back(z);
    };
    for (int a = 0; a < kSeeds; ++a) {
        for (int b = 0; b < kSeeds; ++b) {
            Complex z{re_lo + (re_hi - re_lo) * a / (kSeeds - 1.0),
                      im_hi * b / (kSeeds - 1.0)};
            if (!newton(cp, z)) continue;
            add(z);
            add(std::conj(z));
        }
    }
    std::sort(roots.begin(), roots.end(), [](Complex l, Complex r) {
        return l.real() != r.real() ? l.real() > r.real() : l.imag() > r.imag();
    });
    return roots;
}

Complex rightmost_root(const CharacteristicProblem& cp) {
    const auto roots = characteristic_roots(cp);
    if (roots.empty()) {
        throw Error(ErrorCode::analysis,
                    "no characteristic root converged for k = " + std::to_string(cp.k) +
                        ", tau = " + std::to_string(cp.tau));
    }
    return roots.front();
}

double critical_gain(double tau, const OscillatorParams& osc, double k_lo, double k_hi) {
    auto re = [&](double k) {
        return rightmost_root({osc.omega, osc.kappa, k, tau}).real();
    };
    double f_lo = re(k_lo);
    double f_hi = re(k_hi);
    if (std::abs(f_lo) <= 1e-8) return k_lo;
    if (std::abs(f_hi) <= 1e-8) return k_hi;
    if ((f_lo < 0.0) == (f_hi < 0.0)) {
        throw Error(ErrorCode::range, "Re lambda* has the same sign at k = " +
                                          std::to_string(k_lo) + " and k = " +
                                          std::to_string(k_hi));
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (k_lo + k_hi);
        const double f_mid = re(mid);
        if (std::abs(f_mid) <= 1e-8 || k_hi - k_lo < 1e-15) return mid;
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            k_lo = mid;
            f_lo = f_mid;
        } else {
            k_hi = mid;
        }
    }
    return 0.5 * (k_lo + k_hi);
}

const char* to_string(Stability s) {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        case Stability::marginal: return "marginal";
    }
    return "?";
}

Classification simulate_classify(const CharacteristicProblem& cp, double horizon) {
    OscillatorParams osc;
    osc.omega = cp.omega;
    osc.kappa = cp.kappa;
    const double dt = default_dde_step(cp.tau);
    const std::size_t window = delay_steps(cp.tau, dt);

    Classification out;
    SampledPath<2> path;
    try {
        path = averaged_scheme1_path(osc, cp.k, cp.tau, {1.0, 0.0}, horizon, dt);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::divergence) throw;
        out.verdict = Stability::unstable;
        out.amplitude_end = kInfinity;
        return out;
    }
    const auto half = static_cast<std::size_t>(std::llround(0.5 * horizon / dt));
    out.amplitude_half = window_amplitude(path, half, window);
    out.amplitude_end = window_amplitude(path, path.size() - 1, window);
    const double r = out.ratio();
    if (!std::isfinite(r) || r > 1.02)
        out.verdict = Stability::unstable;
    else if (r < 0.98)
        out.verdict = Stability::stable;
    else
        out.verdict = Stability::marginal;
    return out;
}

std::vector<ChartCell> stability_chart(double omega, double kappa,
                                       const std::vector<double>& ks,
                                       const std::vector<double>& taus, double horizon,
                                       unsigned workers) {
    std::vector<ChartCell> cells(ks.size() * taus.size());
    parallel_for(cells.size(), workers, [&](std::size_t idx) {
        ChartCell& c = cells[idx];
        c.k = ks[idx / taus.size()];
        c.tau = taus[idx % taus.size()];
        const CharacteristicProblem cp{omega, kappa, c.k, c.tau};
        c.re_lambda = rightmost_root(cp).real();
        c.simulated = simulate_classify(cp, horizon).verdict;
        c.marginal_root = std::abs(c.re_lambda) < 1e-3;
        const Stability predicted = c.re_lambda < 0.0 ? Stability::stable : Stability::unstable;
        c.agrees = c.marginal_root || predicted == c.simulated;
    });
    return cells;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

}  // namespace cvfl
