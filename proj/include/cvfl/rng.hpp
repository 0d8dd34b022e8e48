#pragma once

// Counter-based Gaussian noise. Every increment is a pure function of
// (seed, stream_id, channel, step), so trajectories can be generated in any
// order or on any thread and still reproduce bit-for-bit.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cvfl {

/// Philox4x32 with 10 rounds.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key);
};

/// Standard normal deviate addressed by (seed, stream, channel, index).
double standard_normal(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel,
                       std::uint64_t index);

/// Uniform deviate in the open interval (0, 1), same addressing.
double open_uniform(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel,
                    std::uint64_t index);

/// Fixed-lag FIFO. Reads at lag L return the value pushed L pushes ago, or
/// the prefill value while fewer than L values have been pushed.
class DelayLine {
public:
    DelayLine() = default;
    DelayLine(std::size_t lag, double prefill);

    /// A line with no prefill throws Error(delay) on premature reads.
    static DelayLine without_history(std::size_t lag);

    std::size_t lag() const { return lag_; }
    std::size_t pushed() const { return pushed_; }

    /// Value pushed exactly lag() pushes before the next push.
    double delayed() const;
    void push(double value);

private:
    std::size_t lag_ = 0;
    std::vector<double> ring_;
    std::size_t head_ = 0;
    std::size_t pushed_ = 0;
    double prefill_ = 0.0;
    bool has_prefill_ = true;
};

/// Wiener increments for one trajectory, with an optional delay buffer
/// holding the last tau/dt increments (zero before it fills).
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint64_t stream_id, double dt,
                std::size_t delay_steps = 0, std::uint32_t channel = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t step() const { return step_; }
    double dt() const { return dt_; }

    /// Increment of an arbitrary step; does not advance the stream.
    double increment_at(std::uint64_t step) const;

    struct Draw {
        double dW;
        double dW_delayed;
    };

    /// Increment of the current step and the one delay_steps earlier, then
    /// advances.
    Draw next();

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint32_t channel_;
    double dt_;
    double sqrt_dt_;
    std::uint64_t step_ = 0;
    bool delayed_ = false;
    DelayLine buffer_;
};

}  // namespace cvfl
