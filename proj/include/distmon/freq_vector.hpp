#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace distmon {

using Item = uint32_t;
using Count = uint64_t;
// Exact accumulator for frequency moments. Frequencies stay in 64 bits;
// p-th powers and their sums get 128.
using Wide = unsigned __int128;

double wide_to_double(Wide x);

// Overflow-checked v^p in exact integer arithmetic.
Wide pow_wide(Count v, int p);

// Sparse non-negative frequency vector over [0, n). Zero entries are never
// stored.
class FrequencyVector {
 public:
  FrequencyVector() = default;

  static FrequencyVector from_pairs(
      std::initializer_list<std::pair<Item, Count>> pairs) {
    FrequencyVector v;
    for (auto [j, c] : pairs) v.add(j, c);
    return v;
  }

  void add(Item j, Count delta = 1) {
    if (delta == 0) return;
    counts_[j] += delta;
  }

  void set(Item j, Count value) {
    if (value == 0)
      counts_.erase(j);
    else
      counts_[j] = value;
  }

  Count at(Item j) const {
    auto it = counts_.find(j);
    return it == counts_.end() ? 0 : it->second;
  }

  const std::map<Item, Count>& entries() const { return counts_; }
  size_t support_size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }

  bool operator==(const FrequencyVector& o) const {
    return counts_ == o.counts_;
  }

 private:
  std::map<Item, Count> counts_;
};

// (Fp, lp) of a single vector: Fp = sum_j x_j^p exactly, lp = Fp^(1/p).
struct Moments {
  Wide fp;
  double lp;
};
Moments moments(const FrequencyVector& x, int p);

// k local frequency vectors over a universe of size n. The global vector is
// the entrywise sum of the locals.
struct PartitionedInput {
  uint32_t k = 1;
  uint32_t n = 1;
  std::vector<FrequencyVector> locals;

  PartitionedInput() = default;
  PartitionedInput(uint32_t k_, uint32_t n_) : k(k_), n(n_), locals(k_) {}

  FrequencyVector global() const {
    FrequencyVector g;
    for (const auto& loc : locals)
      for (auto [j, c] : loc.entries()) g.add(j, c);
    return g;
  }

  uint64_t stream_length() const {
    uint64_t m = 0;
    for (const auto& loc : locals)
      for (auto [j, c] : loc.entries()) m += c;
    return m;
  }
};

// F_p, F_p' = sum of local moments, and their p-th roots.
struct MomentSummary {
  int p;
  Wide fp;
  Wide fp_prime;
  double lp;
  double lp_prime;
};
MomentSummary partition_moments(const PartitionedInput& inp, int p);

// Keeps entry j iff x_j >= threshold, value unchanged.
FrequencyVector sparsify(const FrequencyVector& x, double threshold);

// Keeps entry j iff x_j >= threshold, value shifted down by the threshold
// (rounded so the result stays integral). Used by the lp-HH tracking
// reduction.
FrequencyVector sparsify_shifted(const FrequencyVector& x, double threshold);

}  // namespace distmon
