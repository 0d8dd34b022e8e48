#include "cvfl/rng.hpp"

#include <cmath>
#include <numbers>

#include "cvfl/model.hpp"

namespace cvfl {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
}

Philox4x32::Counter draw(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel,
                         std::uint64_t index) {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                  static_cast<std::uint32_t>(index >> 32),
                                  static_cast<std::uint32_t>(stream),
                                  static_cast<std::uint32_t>(stream >> 32)};
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                              static_cast<std::uint32_t>(seed >> 32) ^ (channel * kWeyl0)};
    return Philox4x32::generate(ctr, key);
}

// 53 random bits mapped to the open interval (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits =
        ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

double open_uniform(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel,
                    std::uint64_t index) {
    const auto r = draw(seed, stream, channel, index);
    return to_open_unit(r[0], r[1]);
}

double standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel,
                       std::uint64_t index) {
    // Box-Muller, cosine branch.
    const auto r = draw(seed, stream, channel, index);
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// -----------------------------------------------------------------------------

DelayLine::DelayLine(std::size_t lag, double prefill)
    : lag_(lag), ring_(lag, prefill), prefill_(prefill) {}

DelayLine DelayLine::without_history(std::size_t lag) {
    DelayLine line(lag, 0.0);
    line.has_prefill_ = false;
    return line;
}

double DelayLine::delayed() const {
    if (lag_ == 0) {
        throw Error(ErrorCode::delay, "delay line has zero lag");
    }
    if (pushed_ < lag_) {
        if (!has_prefill_) {
            throw Error(ErrorCode::delay, "delay line read before lag samples were pushed");
        }
        return prefill_;
    }
    return ring_[head_];
}

void DelayLine::push(double value) {
    if (lag_ == 0) return;
    ring_[head_] = value;
    head_ = (head_ + 1) % lag_;
    ++pushed_;
}

// -----------------------------------------------------------------------------

NoiseStream::NoiseStream(std::uint64_t seed, std::uint64_t stream_id, double dt,
                         std::size_t delay_steps, std::uint32_t channel)
    : seed_(seed),
      stream_id_(stream_id),
      channel_(channel),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)),
      delayed_(delay_steps > 0),
      buffer_(delay_steps, 0.0) {
    if (!(dt > 0.0)) throw Error(ErrorCode::configuration, "noise stream needs dt > 0");
}

double NoiseStream::increment_at(std::uint64_t step) const {
    return sqrt_dt_ * standard_normal(seed_, stream_id_, channel_, step);
}

NoiseStream::Draw NoiseStream::next() {
    Draw d{increment_at(step_), 0.0};
    if (delayed_) {
        d.dW_delayed = buffer_.delayed();
        buffer_.push(d.dW);
    }
    ++step_;
    return d;
}

}  // namespace cvfl
