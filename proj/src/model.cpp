#include "cvfl/model.hpp"

#include <sstream>

namespace cvfl {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::parameter: return "parameter";
        case ErrorCode::configuration: return "configuration";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::delay: return "delay";
        case ErrorCode::no_measurement: return "no-measurement";
        case ErrorCode::divergent_feedback: return "divergent-feedback";
        case ErrorCode::step_size: return "step-size";
        case ErrorCode::integrity: return "integrity";
        case ErrorCode::analysis: return "analysis";
        case ErrorCode::range: return "range";
        case ErrorCode::shape: return "shape";
    }
    return "unknown";
}

const char* to_string(Scheme scheme) {
    switch (scheme) {
        case Scheme::none: return "none";
        case Scheme::scheme1: return "scheme1";
        case Scheme::scheme2: return "scheme2";
    }
    return "unknown";
}

const char* to_string(MeasurementMode mode) {
    return mode == MeasurementMode::quantum ? "quantum" : "classical";
}

const char* to_string(FixedPointKind kind) {
    return kind == FixedPointKind::stable ? "stable" : "unstable";
}

double bose_einstein(double beta, double hbar, double omega) {
    if (!(beta > 0.0) || !(hbar > 0.0) || !(omega > 0.0)) {
        throw Error(ErrorCode::parameter,
                    "bose_einstein: beta, hbar and omega must be positive");
    }
    const double x = beta * hbar * omega;
    if (std::isinf(x)) return 0.0;
    return 1.0 / std::expm1(x);
}

double OscillatorParams::n_bose() const { return bose_einstein(beta, hbar, omega); }

double Couplings::feedback_diffusion(double k, Scheme scheme) const {
    if (k == 0.0 || scheme == Scheme::none) return 0.0;
    const double base = k * k * record_amplitude * record_amplitude;
    return scheme == Scheme::scheme1 ? 2.0 * base : base;
}

Couplings couplings(const OscillatorParams& osc, const MeasurementParams& meas) {
    Couplings c;
    if (meas.mode == MeasurementMode::quantum) {
        const double rate = meas.gamma * meas.eta;
        c.localization = 2.0 * rate / osc.hbar;
        c.record_amplitude = rate > 0.0 ? std::sqrt(osc.hbar / (2.0 * rate)) : kInfinity;
        c.thermal = osc.kappa * osc.hbar * (1.0 + 2.0 * osc.n_bose()) / 2.0;
        c.decoherence = osc.hbar * meas.gamma / 2.0;
    } else {
        // hbar -> 0 with eta = hbar / sigma; n_B expands to 1 / (beta hbar omega).
        c.localization = 2.0 * meas.gamma / meas.sigma;
        c.record_amplitude =
            meas.gamma > 0.0 ? std::sqrt(meas.sigma / (2.0 * meas.gamma)) : kInfinity;
        c.thermal = std::isinf(osc.beta) ? 0.0 : osc.kappa / (osc.beta * osc.omega);
        c.decoherence = 0.0;
    }
    c.backaction = std::sqrt(c.localization);
    return c;
}

MeasurementParams to_classical(const MeasurementParams& q, double sigma) {
    if (!(sigma > 0.0)) {
        throw Error(ErrorCode::parameter, "to_classical: sigma must be positive");
    }
    MeasurementParams c = q;
    c.mode = MeasurementMode::classical;
    c.sigma = sigma;
    return c;
}

double record_noise_amplitude(const MeasurementParams& meas, double hbar) {
    if (!(meas.gamma > 0.0)) {
        throw Error(ErrorCode::no_measurement, "record noise undefined for gamma = 0");
    }
    if (meas.mode == MeasurementMode::classical) {
        return std::sqrt(meas.sigma / (2.0 * meas.gamma));
    }
    return std::sqrt(hbar / (2.0 * meas.gamma * meas.eta));
}

std::vector<Violation> validate(const OscillatorParams& osc,
                                const MeasurementParams& meas,
                                const FeedbackConfig& fb) {
    std::vector<Violation> out;
    auto add = [&](const char* code, std::string msg) {
        out.push_back({code, std::move(msg)});
    };

    if (!(osc.omega > 0.0) || !std::isfinite(osc.omega))
        add("omega-range", "omega must be positive and finite");
    if (!(osc.kappa >= 0.0) || !std::isfinite(osc.kappa))
        add("kappa-range", "kappa must be non-negative and finite");
    if (!(osc.hbar > 0.0) || !std::isfinite(osc.hbar))
        add("hbar-range", "hbar must be positive and finite");
    if (!(osc.beta > 0.0)) add("beta-range", "beta must be positive or +infinity");

    if (!(meas.gamma >= 0.0) || !std::isfinite(meas.gamma))
        add("gamma-range", "gamma must be non-negative and finite");
    if (meas.mode == MeasurementMode::quantum) {
        if (!(meas.eta > 0.0 && meas.eta <= 1.0))
            add("efficiency-range", "eta must lie in (0, 1]");
    } else if (!(meas.sigma > 0.0) || !std::isfinite(meas.sigma)) {
        add("sigma-range", "sigma must be positive and finite in classical mode");
    }

    if (fb.scheme != Scheme::none) {
        if (!std::isfinite(fb.k)) add("gain-range", "feedback gain must be finite");
        if (fb.k != 0.0 && !(meas.gamma > 0.0)) {
            add("feedback-requires-measurement",
                "feedback with gamma = 0 feeds back an infinitely noisy record");
        }
    }
    if (fb.scheme == Scheme::scheme1 && !(fb.tau > 0.0 && std::isfinite(fb.tau)))
        add("delay-range", "scheme1 requires a positive finite delay tau");
    if (fb.scheme == Scheme::scheme2) {
        if (!std::isfinite(fb.reference.y0) || !std::isfinite(fb.reference.phi))
            add("reference-range", "reference amplitude and phase must be finite");
        if (fb.reference.Omega && !(*fb.reference.Omega > 0.0))
            add("reference-range", "reference frequency must be positive");
    }
    return out;
}

void require_valid(const OscillatorParams& osc, const MeasurementParams& meas,
                   const FeedbackConfig& fb) {
    const auto violations = validate(osc, meas, fb);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid parameters:";
    for (const auto& v : violations) msg << " [" << v.code << "] " << v.message << ";";
    throw Error(ErrorCode::parameter, msg.str());
}

}  // namespace cvfl
