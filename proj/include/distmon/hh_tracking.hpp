#pragma once

#include <map>
#include <optional>
#include <vector>

#include "distmon/freq_vector.hpp"
#include "distmon/ledger.hpp"
#include "distmon/netsim.hpp"
#include "distmon/rng.hpp"

namespace distmon {

// Continuous l2 heavy-hitter tracking: per-site round/phase/interval
// automaton plus the coordinator estimate table.
//
// Message convention: type 0 carries the interval bound L (the coordinator
// adds it), type 1 carries the exact tracked count (the coordinator resyncs).
class L2HHTracker : public TrackingProtocol {
 public:
  struct ItemView {
    uint64_t v = 0;      // tracked count
    uint64_t w = 0;      // increment in current phase
    uint64_t delta = 0;  // increment in current interval
    uint32_t c = 1;      // interval index
    uint64_t r = 0;      // sampled interval threshold in {1..L}
    uint64_t bound = 0;  // L
  };

  // With rescale, eps is divided by sqrt(2 max(1, log2(eps * m_bound))) so
  // the per-round variance sum stays within eps^2 F2'.
  L2HHTracker(uint32_t k, double eps, uint64_t m_bound, bool rescale,
              SeededRng rng);

  void on_event(const StreamEvent& ev, CommLedger& ledger,
                const BitRule& rule) override {
    on_arrival(ev.site, ev.item, ledger, rule);
  }
  void on_arrival(uint32_t site, Item item, CommLedger& ledger,
                  const BitRule& rule);

  // Coordinator side, exposed so messages can be replayed independently.
  void coordinator_apply(const Message& msg);

  double estimate(Item j) const;
  double estimate_site(uint32_t site, Item j) const;

  double eps_internal() const { return eps_; }

  // L = max(1, ceil(eps^2 F / 2^c)); the interval threshold is uniform on
  // {1..L} and the type-0 payload is L itself.
  static uint64_t interval_bound(double eps, double f, uint32_t c);

  // Introspection for tests and invariant checks.
  ItemView state_of(uint32_t site, Item j) const;
  uint64_t round_start_f2(uint32_t site) const;
  uint64_t live_f2(uint32_t site) const;
  uint32_t phases_in_current_round(uint32_t site) const;
  const std::vector<uint32_t>& completed_round_phases(uint32_t site) const;

 private:
  struct ItemState {
    uint64_t epoch = 0;
    uint64_t v = 0;
    uint64_t w = 0;
    uint64_t delta = 0;
    uint32_t c = 1;
    uint64_t r = 0;
    uint64_t bound = 0;
  };
  struct SiteState {
    uint64_t f_round = 1;
    uint64_t f2_live = 0;
    uint64_t epoch = 0;
    uint32_t phases_in_round = 0;
    std::vector<uint32_t> phase_history;
    std::map<Item, ItemState> items;
    SeededRng rng{0};
  };

  void reset_phase_counters(SiteState& st, ItemState& it) const;
  void draw_threshold(SiteState& st, ItemState& it) const;

  uint32_t k_;
  double eps_;
  std::vector<SiteState> sites_;
  std::vector<std::map<Item, double>> vhat_site_;
  std::map<Item, double> vhat_total_;
};

// Per-site factor-(1+theta) growth reporting of local Fp values; the
// coordinator sums last reports, giving a (1 +- theta) tracking estimate of
// Fp'. One extra report per site on its first arrival.
class SumTracker : public TrackingProtocol {
 public:
  SumTracker(uint32_t k, int p, double theta);

  void on_event(const StreamEvent& ev, CommLedger& ledger,
                const BitRule& rule) override {
    on_arrival(ev.site, ev.item, ledger, rule);
  }
  void on_arrival(uint32_t site, Item item, CommLedger& ledger,
                  const BitRule& rule);

  double estimate() const { return reported_sum_; }
  uint64_t reports() const { return reports_; }

 private:
  struct SiteState {
    FrequencyVector counts;
    Wide fp = 0;
    Wide last_report = 0;
    bool reported = false;
  };
  uint32_t k_;
  int p_;
  double theta_;
  uint64_t reports_ = 0;
  double reported_sum_ = 0.0;
  std::vector<SiteState> sites_;
};

// lp heavy-hitter tracking: parallel shift-sparsified l2 trackers for every
// guess tau = 2^0 .. 2^ceil(log2 m_bound), selected at query time through a
// theta = 1/2 lp' sum tracker.
class LpHHTracker : public TrackingProtocol {
 public:
  LpHHTracker(uint32_t k, int p, double eps, uint64_t m_bound, SeededRng rng);

  void on_event(const StreamEvent& ev, CommLedger& ledger,
                const BitRule& rule) override {
    on_arrival(ev.site, ev.item, ledger, rule);
  }
  void on_arrival(uint32_t site, Item item, CommLedger& ledger,
                  const BitRule& rule);

  double estimate(Item j) const;
  double lp_prime_estimate() const;
  double eps_prime() const { return eps_prime_; }

  // Index of the instance a query at the current lp' estimate would use.
  std::optional<uint32_t> selected_instance() const;

  uint32_t instance_count() const { return static_cast<uint32_t>(instances_.size()); }
  Count shift_floor(uint32_t instance) const { return instances_[instance].min_count; }
  const L2HHTracker& instance_tracker(uint32_t t) const { return instances_[t].tracker; }

 private:
  struct Instance {
    double tau;
    Count min_count;  // arrivals route to the tracker once v_ij reaches this
    L2HHTracker tracker;
  };
  uint32_t k_;
  int p_;
  double eps_;
  double eps_prime_;
  SumTracker sum_tracker_;
  std::vector<FrequencyVector> raw_counts_;
  std::vector<Instance> instances_;
};

}  // namespace distmon
