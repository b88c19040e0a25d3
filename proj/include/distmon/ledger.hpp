#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace distmon {

// Fixed per-message size rule: item id + site id + one 64-bit payload.
struct BitRule {
  uint32_t n = 1;
  uint32_t k = 1;

  static uint64_t ceil_log2(uint64_t x) {
    uint64_t bits = 0;
    uint64_t v = 1;
    while (v < x) {
      v <<= 1;
      ++bits;
    }
    return bits;
  }

  uint64_t bits_per_message() const {
    return ceil_log2(n) + ceil_log2(k) + 64;
  }
};

// Communication meter: every protocol message is charged here. Totals are
// monotone over a run; total_bits always equals the sum of per-site bits.
class CommLedger {
 public:
  explicit CommLedger(uint32_t k) : per_site_bits_(k, 0) {}

  // One message attributable to the given site (either direction).
  void charge(uint32_t site, uint64_t bits) { charge_many(site, 1, bits); }

  void charge_many(uint32_t site, uint64_t count, uint64_t bits_each) {
    if (site >= per_site_bits_.size())
      throw std::out_of_range("CommLedger::charge: site index");
    if (count == 0) return;
    const uint64_t bits = count * bits_each;
    per_site_bits_[site] += bits;
    total_bits_ += bits;
    total_messages_ += count;
    per_round_bits_[round_] += bits;
  }

  // A coordinator broadcast costs one message per site.
  void charge_broadcast(uint64_t bits_each) {
    for (uint32_t i = 0; i < per_site_bits_.size(); ++i) charge(i, bits_each);
  }

  void set_round(uint32_t round) { round_ = round; }
  uint32_t round() const { return round_; }

  uint64_t total_bits() const { return total_bits_; }
  uint64_t total_messages() const { return total_messages_; }
  const std::vector<uint64_t>& per_site_bits() const { return per_site_bits_; }
  const std::map<uint32_t, uint64_t>& per_round_bits() const {
    return per_round_bits_;
  }

 private:
  uint64_t total_bits_ = 0;
  uint64_t total_messages_ = 0;
  uint32_t round_ = 0;
  std::vector<uint64_t> per_site_bits_;
  std::map<uint32_t, uint64_t> per_round_bits_;
};

}  // namespace distmon
