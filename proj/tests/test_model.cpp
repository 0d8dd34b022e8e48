#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cvfl/model.hpp"

using namespace cvfl;

namespace {

bool has_code(const std::vector<Violation>& v, const std::string& code) {
    return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("occupation number") {
    CHECK(bose_einstein(kInfinity, 1.0, 1.0) == 0.0);
    CHECK(bose_einstein(std::log(2.0), 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    // 1 / (e - 1) to 20 digits
    CHECK(bose_einstein(1.0, 1.0, 1.0) == doctest::Approx(0.58197670686932642439).epsilon(1e-14));
    CHECK(bose_einstein(2.0, 0.5, 1.0) == bose_einstein(1.0, 1.0, 1.0));

    OscillatorParams osc;
    CHECK(osc.n_bose() == 0.0);
    osc.beta = 1.0;
    CHECK(osc.n_bose() == doctest::Approx(0.58197670686932642439));
}

TEST_CASE("occupation number is strictly decreasing on a log grid") {
    double prev = kInfinity;
    for (int e = -8; e <= 2; ++e) {
        for (double m : {1.0, 2.0, 5.0}) {
            const double x = m * std::pow(10.0, e);
            const double n = bose_einstein(x, 1.0, 1.0);
            CHECK(std::isfinite(n));
            CHECK(n >= 0.0);
            CHECK(n < prev);
            prev = n;
        }
    }
    CHECK(bose_einstein(1e-9, 1.0, 1.0) > 1e8);
}

TEST_CASE("classical record amplitude") {
    MeasurementParams q;
    q.gamma = 2.0;
    CHECK(record_noise_amplitude(to_classical(q, 1.0), 1.0) == doctest::Approx(0.5));
    q.gamma = 0.5;
    CHECK(record_noise_amplitude(to_classical(q, 2.0), 1.0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(record_noise_amplitude(to_classical(q, 1e-12), 1.0) < 1e-5);

    const auto c = to_classical(q, 0.37);
    CHECK(c.mode == MeasurementMode::classical);
    CHECK(c.gamma == q.gamma);
    CHECK(c.efficiency(1.3) == 1.3 / 0.37);
    CHECK(c.error_free() == false);
    CHECK(to_classical(q, 1e-9).error_free());
}

TEST_CASE("quantum record amplitude") {
    MeasurementParams q;
    q.gamma = 2.0;
    q.eta = 0.5;
    CHECK(record_noise_amplitude(q, 1.0) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("couplings") {
    OscillatorParams osc;
    osc.kappa = 0.1;
    MeasurementParams m;
    m.gamma = 0.2;
    const auto c = couplings(osc, m);
    CHECK(c.thermal == doctest::Approx(0.05));
    CHECK(c.decoherence == doctest::Approx(0.1));
    CHECK(c.localization == doctest::Approx(0.4));
    CHECK(c.backaction * c.backaction == doctest::Approx(c.localization));
    CHECK(c.feedback_diffusion(0.1, Scheme::scheme2) == doctest::Approx(0.025));
    CHECK(c.feedback_diffusion(0.1, Scheme::scheme1) == doctest::Approx(0.05));
    CHECK(c.feedback_diffusion(0.1, Scheme::none) == 0.0);

    osc.beta = 1.0;
    const auto cl = couplings(osc, to_classical(m, 1.0));
    CHECK(cl.thermal == doctest::Approx(0.1));
    CHECK(cl.decoherence == 0.0);
    CHECK(cl.localization == doctest::Approx(0.4));
}

TEST_CASE("unstable fixed point flips only the mean damping") {
    OscillatorParams osc;
    osc.kappa = 0.1;
    osc.fixed_point = FixedPointKind::unstable;
    CHECK(osc.mean_damping() == -0.1);
    CHECK(couplings(osc, MeasurementParams{}).thermal > 0.0);
}

TEST_CASE("validation") {
    CHECK(validate({}, {}, {}).empty());

    MeasurementParams m;
    m.gamma = 0.0;
    FeedbackConfig fb;
    fb.scheme = Scheme::scheme2;
    fb.k = 0.1;
    CHECK(has_code(validate({}, m, fb), "feedback-requires-measurement"));
    fb.scheme = Scheme::none;
    CHECK(validate({}, m, fb).empty());

    MeasurementParams bad;
    bad.eta = 1.2;
    CHECK(has_code(validate({}, bad, {}), "efficiency-range"));

    OscillatorParams osc;
    osc.omega = 0.0;
    osc.kappa = -1.0;
    const auto v = validate(osc, bad, {});
    CHECK(has_code(v, "omega-range"));
    CHECK(has_code(v, "kappa-range"));
    CHECK(v.size() == 3);

    FeedbackConfig s1;
    s1.scheme = Scheme::scheme1;
    s1.tau = 0.0;
    CHECK(has_code(validate({}, {}, s1), "delay-range"));

    // Pure: same inputs, same output.
    const auto again = validate(osc, bad, {});
    REQUIRE(again.size() == v.size());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(again[i].code == v[i].code);

    CHECK_THROWS_AS(require_valid(osc, bad, {}), Error);
    try {
        require_valid(osc, bad, {});
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parameter);
    }
}

TEST_CASE("reference waveform") {
    Reference r;
    CHECK(r(0.0, 1.0) == -2.0);
    CHECK(r(std::numbers::pi, 1.0) == doctest::Approx(2.0));
    r.Omega = 2.0;
    CHECK(r(std::numbers::pi / 2.0, 1.0) == doctest::Approx(2.0));
}

}  // TEST_SUITE
