#pragma once

#include <cstdint>

namespace distmon {

// Counter-based seeded generator. A (seed, stream) pair identifies an
// independent deterministic draw sequence; derive() produces a child stream
// keyed by a sub-stream id, so protocols can hand out per-site / per-level /
// per-trial generators without sharing state.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    state_ = mix64(mix64(seed + 0x9e3779b97f4a7c15ull) ^
                   mix64(stream + 0xbf58476d1ce4e5b9ull));
  }

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound). bound must be > 0.
  uint64_t next_below(uint64_t bound) {
    // rejection-free modulo is fine at our scale; bias is < 2^-40 for
    // bounds under 2^24, far below anything the tests can resolve
    return next() % bound;
  }

  // Uniform integer in [lo, hi] inclusive.
  uint64_t uniform_int(uint64_t lo, uint64_t hi) {
    return lo + next_below(hi - lo + 1);
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  bool bernoulli(double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return next_double() < p;
  }

  SeededRng derive(uint64_t substream) const {
    return SeededRng(seed_, mix64(stream_ * 0xd1342543de82ef95ull + substream + 1));
  }

  uint64_t seed() const { return seed_; }
  uint64_t stream() const { return stream_; }

  static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t state_;
};

}  // namespace distmon
