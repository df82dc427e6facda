#pragma once

#include <algorithm>
#include <chrono>
#include <thread>

namespace etrace {

/// Time source for sampling. All scheduling goes through this seam so tests can run on virtual time.
/// Times are milliseconds since an arbitrary, clock-specific epoch.
class Clock {
  public:
    virtual ~Clock() = default;

    [[nodiscard]] virtual double now_ms() const = 0;

    /// Blocks (or advances virtual time) until now_ms() >= t_ms. Returns immediately if already past.
    virtual void sleep_until_ms(double t_ms) = 0;
};

class SteadyClock final : public Clock {
  public:
    SteadyClock() :
        epoch_{ std::chrono::steady_clock::now() } {}

    [[nodiscard]] double now_ms() const override {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_).count();
    }

    void sleep_until_ms(double t_ms) override {
        std::this_thread::sleep_until(epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double, std::milli>(t_ms)));
    }

  private:
    std::chrono::steady_clock::time_point epoch_;
};

/// Deterministic clock: time only moves when someone sleeps or advances it.
class VirtualClock final : public Clock {
  public:
    explicit VirtualClock(double initial_ms = 0.0) :
        now_{ initial_ms } {}

    [[nodiscard]] double now_ms() const override { return now_; }

    void sleep_until_ms(double t_ms) override { now_ = std::max(now_, t_ms); }

    void advance(double d_ms) { now_ += d_ms; }

  private:
    double now_;
};

}  // namespace etrace
