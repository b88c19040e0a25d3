#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "distmon/covers.hpp"
#include "distmon/hh_tracking.hpp"

namespace distmon {

// Fires at exactly the event on which the global count of one tracked item
// first reaches an integer target. Staged-slack scheme: each site gets
// slack max(1, floor(gap / 2k)); a site reports (with its exact count) after
// consuming its slack; after k reports, or when the remaining gap drops to
// 2k, the coordinator polls everyone and re-stages; with gap <= 2k every
// arrival is reported, so the crossing event is pinned exactly.
class ThresholdTracker {
 public:
  ThresholdTracker(uint32_t k, uint64_t target,
                   const std::vector<Count>& initial_counts = {});

  void on_arrival(uint32_t site, CommLedger& ledger, const BitRule& rule);

  bool fired() const { return fired_; }
  // Number of arrivals delivered before firing (0 = fired at construction).
  std::optional<uint64_t> fire_event() const;
  uint64_t events_seen() const { return events_; }

  // Smallest non-negative integer c with c >= tau.
  static uint64_t integer_target(double tau);
  // Smallest non-negative integer c with c^p >= x (exact in integers).
  static uint64_t pth_power_target(double x, int p);

 private:
  void poll_and_stage(CommLedger& ledger, const BitRule& rule);

  uint32_t k_;
  uint64_t target_;
  std::vector<uint64_t> count_;  // true local counts
  std::vector<uint64_t> known_;  // counts last seen by the coordinator
  std::vector<uint64_t> slack_;
  uint64_t sum_known_ = 0;
  uint32_t reports_ = 0;
  bool staged_ = false;
  bool per_arrival_ = false;
  bool fired_ = false;
  uint64_t events_ = 0;
  uint64_t fire_event_ = 0;
};

// Phase-based tracking of v_j^p for a single item. A phase starts from the
// exact count v_s and ends when v_j^p has grown by eps2f = eps^2 * Fhat
// (tracker 2). Tracker 1 fires at the public-random intermediate threshold
// (r + v_s^p)^{1/p}, r ~ U[0, eps2f], switching the estimate from v_s^p to
// v_s^p + eps2f; this keeps E[w_j] = v_j^p within the phase.
class VjpTracker {
 public:
  VjpTracker(uint32_t k, int p, const std::vector<Count>& start_counts,
             double eps2f, double r);

  void on_arrival(uint32_t site, CommLedger& ledger, const BitRule& rule);

  bool phase_complete() const { return alg2_.fired(); }
  double w() const;
  Count start_count() const { return v_start_; }
  double start_power() const { return v_start_p_; }

 private:
  Count v_start_;
  double v_start_p_;
  double eps2f_;
  ThresholdTracker alg1_;
  ThresholdTracker alg2_;
};

// One round-based weak-cover tracker over the items it is fed. Maintains an
// lp-HH tracker at alpha^{1/p}/4 for admissions and a theta = 0.05 sum
// tracker for the end-of-round budget; each round starts with a static Fp
// estimate Fhat and an exact cover, then admits items whose tracked estimate
// reaches (2/3) alpha^{1/p} Fhat^{1/p} and runs a VjpTracker per admitted
// item. Query returns {(j, w_j)} over the admitted set.
class WeakCoverTracker {
 public:
  struct RoundInfo {
    uint64_t start_event = 0;
    double fhat = 0.0;
    int end_trigger = 0;  // 0 ongoing; 1 phase budget, 2 sum growth, 3 admissions
    uint64_t end_event = 0;
  };

  WeakCoverTracker(uint32_t k, uint32_t n, int p, double alpha, double eps,
                   uint64_t m_bound, SeededRng rng);

  void on_arrival(uint32_t site, Item item, CommLedger& ledger,
                  const BitRule& rule);

  CoverSet query() const;

  const std::vector<RoundInfo>& rounds() const { return rounds_; }
  bool failed() const { return failed_; }
  double fhat() const { return fhat_; }
  uint64_t completed_phases_in_round() const { return n_r_; }
  size_t admitted_count() const { return active_.size(); }
  bool has(Item j) const { return active_.count(j) != 0; }

  // Odd repetition count making a median of 0.9-success runs fail with
  // probability at most 1/phi^2.
  static uint32_t fhat_reps(uint32_t phi);

 private:
  PartitionedInput prefix_input() const;
  double run_fhat(CommLedger& ledger, const BitRule& rule);
  void spawn_tracker(Item j, CommLedger& ledger, const BitRule& rule);
  void start_round(CommLedger& ledger, const BitRule& rule);

  uint32_t k_;
  uint32_t n_;
  int p_;
  double alpha_;
  double eps_;
  uint64_t m_bound_;
  SeededRng static_rng_;
  SeededRng public_rng_;
  uint64_t static_calls_ = 0;

  std::vector<FrequencyVector> locals_;
  uint64_t events_seen_ = 0;
  LpHHTracker hh_;
  SumTracker sum_;

  bool round_active_ = false;
  double fhat_ = 0.0;
  uint64_t n_r_ = 0;
  size_t i_size_t0_ = 0;
  std::map<Item, VjpTracker> active_;
  std::vector<RoundInfo> rounds_;
  bool failed_ = false;
};

// Continuous Fp estimation: 2 phi weak-cover trackers over the subsample
// branches u^{l,1} = u^l restricted to h_{l+1} = 1 and u^{l,0} to h_{l+1} = 0,
// an exactly-forwarded deepest-level tail, and the Y recursion at query time.
class FpTracker : public TrackingProtocol {
 public:
  FpTracker(uint32_t k, uint32_t n, int p, double eps, uint64_t m_bound,
            SeededRng rng, RecursionSign sign = RecursionSign::plus);

  void on_event(const StreamEvent& ev, CommLedger& ledger,
                const BitRule& rule) override {
    on_arrival(ev.site, ev.item, ledger, rule);
  }
  void on_arrival(uint32_t site, Item item, CommLedger& ledger,
                  const BitRule& rule);

  double estimate() const;

  uint32_t phi() const { return phi_; }
  double alpha() const { return alpha_; }
  const WeakCoverTracker& cover(uint32_t level, int branch) const {
    return *covers_[2 * level + branch];
  }
  uint64_t total_rounds() const;
  uint64_t max_rounds_per_cover() const;
  bool any_failed() const;

 private:
  uint32_t survival_level(Item j) const;

  uint32_t k_;
  uint32_t n_;
  int p_;
  double eps_;
  uint32_t phi_;
  double alpha_;
  RecursionSign sign_;
  std::vector<std::vector<uint8_t>> h_;
  std::vector<std::unique_ptr<WeakCoverTracker>> covers_;  // index 2l + b
  FrequencyVector tail_counts_;
};

}  // namespace distmon
