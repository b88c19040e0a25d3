#pragma once

#include <functional>
#include <vector>

#include "distmon/hh_static.hpp"

namespace distmon {

// Set of (index, value) pairs covering the alpha-heavy entries of u = v^p,
// with per-value (1 +- eps) accuracy (eps = 0 when exact_values).
struct CoverSet {
  std::vector<std::pair<Item, double>> pairs;
  double alpha = 0.0;
  double eps = 0.0;
  bool exact_values = false;

  bool contains(Item j) const {
    for (auto& [i, w] : pairs)
      if (i == j) return true;
    return false;
  }
};

// Hard cap on cover size: 4^p / alpha + 1.
uint64_t cover_size_cap(int p, double alpha);

// Round 1: boosted one-round lp-HH at eps = alpha^{1/p} / 4, failure 1/n^2;
// keep the top 4^p/alpha positive estimates. Round 2: collect exact global
// counts for the kept indices. Returns {(j, v_j^p)} with exact values.
CoverSet cover_two_round(const PartitionedInput& inp, int p, double alpha,
                         uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                         const BitRule& rule);

// One round: boosted one-round lp-HH at eps' = alpha^{1/p} * eps / (8p);
// returns {(j, v_hat_j^p)} for the top indices.
CoverSet cover_one_round(const PartitionedInput& inp, int p, double alpha,
                         double eps, uint64_t m_bound, SeededRng rng,
                         CommLedger& ledger, const BitRule& rule);

// Which sign the Y recursion applies to the cover correction term.
// `plus` makes exact covers reproduce |u| with zero error; `printed_minus`
// is the alternative unbiased form, kept behind this switch.
enum class RecursionSign { plus, printed_minus };

// phi subsampling vectors of iid fair bits over [0, n), one rng substream
// per level.
std::vector<std::vector<uint8_t>> draw_subsample_vectors(uint32_t phi,
                                                         uint32_t n,
                                                         SeededRng rng);

// The Y recursion over per-level covers of u^l (l = 0..phi-1) and the exact
// deepest-level tail {(j, u_j) : j survives all phi vectors}. Outputs 0 when
// the tail support exceeds 100, as the estimator prescribes.
double recursive_sketch(
    uint32_t phi, const std::vector<std::vector<uint8_t>>& h,
    const std::function<CoverSet(uint32_t level)>& cover_provider,
    const std::vector<std::pair<Item, double>>& tail,
    RecursionSign sign = RecursionSign::plus);

// Restriction of the input to items passing the predicate.
PartitionedInput restrict_input(const PartitionedInput& inp,
                                const std::function<bool(Item)>& keep);

// Static Fp via recursive sketching over u = v^p with per-level covers at
// alpha = eps^2 / phi^3 (two-round exact covers or one-round approximate
// covers). Returns a (1 +- eps) approximation of Fp with prob >= 0.9.
double fp_static(const PartitionedInput& inp, int p, double eps, int rounds,
                 uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                 const BitRule& rule, RecursionSign sign = RecursionSign::plus);

// Boost reps used for cover sub-calls at failure 1/n^2 (odd ceil(48 ln n)).
uint32_t cover_boost_reps(uint32_t n);

}  // namespace distmon
