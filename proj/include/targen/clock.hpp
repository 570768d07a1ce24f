#pragma once

#include <chrono>
#include <cstdint>
#include <thread>
#include <vector>

namespace targen {

// Time source used by rate limiting, retry backoff, and provenance stamps.
// Injected so tests (and deterministic replays) can run on virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::steady_clock::time_point now() = 0;
  virtual void sleep_for(std::chrono::milliseconds d) = 0;
  virtual std::int64_t unix_seconds() = 0;
};

class SystemClock final : public Clock {
 public:
  std::chrono::steady_clock::time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(std::chrono::milliseconds d) override { std::this_thread::sleep_for(d); }
  std::int64_t unix_seconds() override {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }
};

// Virtual clock: sleep_for advances time instantly and records the request.
class ManualClock final : public Clock {
 public:
  std::chrono::steady_clock::time_point now() override { return t_; }
  void sleep_for(std::chrono::milliseconds d) override {
    sleeps.push_back(d);
    t_ += d;
  }
  std::int64_t unix_seconds() override {
    return std::chrono::duration_cast<std::chrono::seconds>(t_.time_since_epoch()).count();
  }
  void advance(std::chrono::milliseconds d) { t_ += d; }
  std::chrono::milliseconds total_slept() const {
    std::chrono::milliseconds total{0};
    for (auto d : sleeps) total += d;
    return total;
  }

  std::vector<std::chrono::milliseconds> sleeps;

 private:
  std::chrono::steady_clock::time_point t_{};
};

inline SystemClock& system_clock() {
  static SystemClock clock;
  return clock;
}

}  // namespace targen
