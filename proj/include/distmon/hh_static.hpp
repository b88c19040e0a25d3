#pragma once

#include <functional>
#include <map>

#include "distmon/freq_vector.hpp"
#include "distmon/ledger.hpp"
#include "distmon/rng.hpp"

namespace distmon {

// Per-item frequency estimates under an additive eps * norm guarantee.
// Items never sampled are simply absent and estimate as 0.
struct HHEstimate {
  enum class Norm { l2_prime, lp_prime };

  std::map<Item, double> estimates;
  double eps = 0.0;
  Norm norm = Norm::l2_prime;
  int p = 2;

  double at(Item j) const {
    auto it = estimates.find(j);
    return it == estimates.end() ? 0.0 : it->second;
  }
};

// One-round sampling estimator. Site i sends (j, v_ij) with probability
// min{1, 3 v_ij^2 / (eps^2 F2(v^(i)))}; the coordinator sums v_ij / p_ij over
// received messages. Unbiased with Var <= (1/3) eps^2 F2'. Sites with zero
// local F2 stay silent.
HHEstimate l2hh_static(const PartitionedInput& inp, double eps, SeededRng rng,
                       CommLedger& ledger, const BitRule& rule);

// Two rounds: exchange local Fp values to fix lp', sparsify each local vector
// at eps * lp' / k, then run l2hh_static with eps' = eps^{p/2} / k^{p/2 - 1}.
// Guarantee: |v_hat_j - v_j| <= 2 eps lp' per item with prob >= 2/3.
HHEstimate lphh_two_round(const PartitionedInput& inp, int p, double eps,
                          SeededRng rng, CommLedger& ledger,
                          const BitRule& rule);

// One round: runs parallel sparsified instances for every guess
// tau = 2^0 .. 2^ceil(log2 m_bound) while the sites concurrently report their
// local Fp; the coordinator keeps the instance with tau <= lp' <= 2tau
// (ties broken toward the larger tau).
HHEstimate lphh_one_round(const PartitionedInput& inp, int p, double eps,
                          uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                          const BitRule& rule);

// Per-item median over reps independent runs of the given estimator.
// reps must be odd.
using EstimatorRunner = std::function<HHEstimate(SeededRng, CommLedger&)>;
HHEstimate median_boost(const EstimatorRunner& runner, uint32_t reps,
                        SeededRng rng, CommLedger& ledger);

// Largest power of two tau with tau <= x <= 2 tau (0 if x <= 0).
double select_tau(double x);

}  // namespace distmon
