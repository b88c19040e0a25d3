#include "distmon/fp_tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distmon {

ThresholdTracker::ThresholdTracker(uint32_t k, uint64_t target,
                                   const std::vector<Count>& initial_counts)
    : k_(k), target_(target), count_(k, 0), known_(k, 0), slack_(k, 0) {
  if (k == 0) throw std::invalid_argument("tracker needs at least one site");
  if (!initial_counts.empty()) {
    if (initial_counts.size() != k)
      throw std::invalid_argument("initial counts must cover every site");
    for (uint32_t i = 0; i < k; ++i) {
      count_[i] = initial_counts[i];
      known_[i] = initial_counts[i];
      sum_known_ += initial_counts[i];
    }
  }
  if (sum_known_ >= target_) {
    fired_ = true;
    fire_event_ = 0;
  }
}

std::optional<uint64_t> ThresholdTracker::fire_event() const {
  if (!fired_) return std::nullopt;
  return fire_event_;
}

uint64_t ThresholdTracker::integer_target(double tau) {
  if (tau <= 0.0) return 0;
  double c = std::ceil(tau);
  // Guard against ceil landing one too low/high near representability edges.
  if (c < tau) c += 1.0;
  while (c - 1.0 >= tau) c -= 1.0;
  return static_cast<uint64_t>(c);
}

uint64_t ThresholdTracker::pth_power_target(double x, int p) {
  if (p < 1) throw std::invalid_argument("pth_power_target: p must be >= 1");
  if (x <= 0.0) return 0;
  uint64_t c = static_cast<uint64_t>(std::ceil(std::pow(x, 1.0 / p)));
  if (c == 0) c = 1;
  // Fix up float error exactly: want min{c : c^p >= x}.
  while (wide_to_double(pow_wide(c, p)) < x) ++c;
  while (c > 0 && wide_to_double(pow_wide(c - 1, p)) >= x) --c;
  return c;
}

void ThresholdTracker::poll_and_stage(CommLedger& ledger,
                                      const BitRule& rule) {
  const uint64_t bits = rule.bits_per_message();
  // Poll request + exact-count reply per site, then the slack broadcast.
  ledger.charge_broadcast(bits);
  for (uint32_t i = 0; i < k_; ++i) {
    ledger.charge(i, bits);
    sum_known_ += count_[i] - known_[i];
    known_[i] = count_[i];
  }
  ledger.charge_broadcast(bits);
  reports_ = 0;
  staged_ = true;
  if (sum_known_ >= target_) {
    fired_ = true;
    fire_event_ = events_;
    return;
  }
  const uint64_t gap = target_ - sum_known_;
  if (gap <= 2 * uint64_t{k_}) {
    per_arrival_ = true;
    return;
  }
  const uint64_t s = std::max<uint64_t>(1, gap / (2 * uint64_t{k_}));
  for (uint32_t i = 0; i < k_; ++i) slack_[i] = s;
}

void ThresholdTracker::on_arrival(uint32_t site, CommLedger& ledger,
                                  const BitRule& rule) {
  if (site >= k_) throw std::out_of_range("site index out of range");
  if (fired_) return;
  events_ += 1;
  count_[site] += 1;
  if (!staged_) poll_and_stage(ledger, rule);
  if (fired_ || per_arrival_) {
    if (!fired_ && per_arrival_) {
      const uint64_t bits = rule.bits_per_message();
      ledger.charge(site, bits);
      sum_known_ += count_[site] - known_[site];
      known_[site] = count_[site];
      if (sum_known_ >= target_) {
        fired_ = true;
        fire_event_ = events_;
      }
    }
    return;
  }

  const uint64_t consumed = count_[site] - known_[site];
  if (consumed < slack_[site]) return;

  // Slack exhausted: report the exact local count.
  ledger.charge(site, rule.bits_per_message());
  sum_known_ += consumed;
  known_[site] = count_[site];
  reports_ += 1;
  if (sum_known_ >= target_) {
    fired_ = true;
    fire_event_ = events_;
    return;
  }
  const uint64_t gap = target_ - sum_known_;
  if (gap <= 2 * uint64_t{k_} || reports_ >= k_)
    poll_and_stage(ledger, rule);
}

VjpTracker::VjpTracker(uint32_t k, int p,
                       const std::vector<Count>& start_counts, double eps2f,
                       double r)
    : eps2f_(eps2f),
      alg1_(k, 0, start_counts),
      alg2_(k, 0, start_counts) {
  if (!(eps2f > 0.0)) throw std::invalid_argument("vjp tracker needs eps2f > 0");
  Count v = 0;
  for (Count c : start_counts) v += c;
  v_start_ = v;
  v_start_p_ = wide_to_double(pow_wide(v, p));
  alg1_ = ThresholdTracker(
      k, ThresholdTracker::pth_power_target(r + v_start_p_, p), start_counts);
  alg2_ = ThresholdTracker(
      k, ThresholdTracker::pth_power_target(eps2f + v_start_p_, p),
      start_counts);
}

void VjpTracker::on_arrival(uint32_t site, CommLedger& ledger,
                            const BitRule& rule) {
  alg1_.on_arrival(site, ledger, rule);
  alg2_.on_arrival(site, ledger, rule);
}

double VjpTracker::w() const {
  return alg1_.fired() ? v_start_p_ + eps2f_ : v_start_p_;
}

uint32_t WeakCoverTracker::fhat_reps(uint32_t phi) {
  const double goal = 1.0 / (static_cast<double>(phi) * phi);
  for (uint32_t reps = 1; reps <= 31; reps += 2) {
    // P(Binomial(reps, 0.1) >= ceil(reps / 2)): the median is off only when
    // at least half of the runs land outside the 0.9-probability band.
    double fail = 0.0;
    for (uint32_t i = (reps + 1) / 2; i <= reps; ++i) {
      double term = 1.0;
      for (uint32_t t = 0; t < i; ++t)
        term *= 0.1 * static_cast<double>(reps - t) / (i - t);
      for (uint32_t t = 0; t < reps - i; ++t) term *= 0.9;
      fail += term;
    }
    if (fail <= goal) return reps;
  }
  return 31;
}

WeakCoverTracker::WeakCoverTracker(uint32_t k, uint32_t n, int p, double alpha,
                                   double eps, uint64_t m_bound, SeededRng rng)
    : k_(k),
      n_(n),
      p_(p),
      alpha_(alpha),
      eps_(eps),
      m_bound_(m_bound),
      static_rng_(rng.derive(0)),
      public_rng_(rng.derive(1)),
      locals_(k),
      hh_(k, p, std::min(0.999, std::pow(alpha, 1.0 / p) / 4.0), m_bound,
          rng.derive(2)),
      sum_(k, p, 0.05) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("weak cover needs alpha, eps in (0, 1)");
  if (p < 2) throw std::invalid_argument("weak cover needs p >= 2");
}

PartitionedInput WeakCoverTracker::prefix_input() const {
  PartitionedInput inp(k_, n_);
  inp.locals = locals_;
  return inp;
}

double WeakCoverTracker::run_fhat(CommLedger& ledger, const BitRule& rule) {
  const PartitionedInput inp = prefix_input();
  const uint32_t phi = std::max<uint32_t>(
      1, static_cast<uint32_t>(BitRule::ceil_log2(std::max<uint32_t>(n_, 2))));
  const uint32_t reps = fhat_reps(phi);
  auto attempt = [&]() {
    std::vector<double> vals;
    vals.reserve(reps);
    for (uint32_t r = 0; r < reps; ++r)
      vals.push_back(fp_static(inp, p_, 0.2, 2, m_bound_,
                               static_rng_.derive(static_calls_++), ledger,
                               rule));
    auto mid = vals.begin() + reps / 2;
    std::nth_element(vals.begin(), mid, vals.end());
    return *mid;
  };
  double fhat = attempt();
  if (fhat <= 0.0) fhat = attempt();  // retry once on a detectable failure
  if (fhat <= 0.0) {
    failed_ = true;
    fhat = std::max(1.0, sum_.estimate());
  }
  return fhat;
}

void WeakCoverTracker::spawn_tracker(Item j, CommLedger& ledger,
                                     const BitRule& rule) {
  // Phase start: collect the exact per-site counts of j.
  const uint64_t bits = rule.bits_per_message();
  std::vector<Count> counts(k_);
  for (uint32_t i = 0; i < k_; ++i) {
    ledger.charge(i, bits);
    counts[i] = locals_[i].at(j);
  }
  const double eps2f = eps_ * eps_ * fhat_;
  const double r = public_rng_.uniform(0.0, eps2f);
  active_.insert_or_assign(j, VjpTracker(k_, p_, counts, eps2f, r));
}

void WeakCoverTracker::start_round(CommLedger& ledger, const BitRule& rule) {
  fhat_ = run_fhat(ledger, rule);
  active_.clear();
  const double cover_alpha =
      std::min(0.5, alpha_ / std::pow(6.0, p_ + 3));
  CoverSet cover = cover_two_round(prefix_input(), p_, cover_alpha, m_bound_,
                                   static_rng_.derive(static_calls_++), ledger,
                                   rule);
  for (auto& [j, ignored] : cover.pairs) {
    (void)ignored;
    spawn_tracker(j, ledger, rule);
  }
  i_size_t0_ = active_.size();
  n_r_ = 0;
  round_active_ = true;
  rounds_.push_back(RoundInfo{events_seen_, fhat_, 0, 0});
}

void WeakCoverTracker::on_arrival(uint32_t site, Item item, CommLedger& ledger,
                                  const BitRule& rule) {
  if (site >= k_) throw std::out_of_range("site index out of range");
  locals_[site].add(item, 1);
  events_seen_ += 1;
  hh_.on_arrival(site, item, ledger, rule);
  sum_.on_arrival(site, item, ledger, rule);

  if (!round_active_) {
    start_round(ledger, rule);
    return;
  }

  auto it = active_.find(item);
  if (it != active_.end()) {
    it->second.on_arrival(site, ledger, rule);
    if (it->second.phase_complete()) {
      n_r_ += 1;
      spawn_tracker(item, ledger, rule);
    }
  } else if (hh_.estimate(item) >=
             (2.0 / 3.0) * std::pow(alpha_, 1.0 / p_) *
                 std::pow(fhat_, 1.0 / p_)) {
    spawn_tracker(item, ledger, rule);
  }

  // End-of-round triggers, evaluated in order after each delivered event.
  int trigger = 0;
  if (static_cast<double>(n_r_) > 3.0 / (eps_ * eps_))
    trigger = 1;
  else if (sum_.estimate() > 4.0 * fhat_)
    trigger = 2;
  else if (static_cast<double>(active_.size() - i_size_t0_) >
           std::pow(6.0, p_ + 3) / alpha_)
    trigger = 3;
  if (trigger != 0) {
    rounds_.back().end_trigger = trigger;
    rounds_.back().end_event = events_seen_;
    start_round(ledger, rule);
  }
}

CoverSet WeakCoverTracker::query() const {
  CoverSet q;
  q.alpha = alpha_;
  q.eps = eps_;
  q.exact_values = false;
  for (auto& [j, tracker] : active_) q.pairs.emplace_back(j, tracker.w());
  return q;
}

FpTracker::FpTracker(uint32_t k, uint32_t n, int p, double eps,
                     uint64_t m_bound, SeededRng rng, RecursionSign sign)
    : k_(k), n_(n), p_(p), eps_(eps), sign_(sign) {
  if (p < 2) throw std::invalid_argument("fp tracker needs p >= 2");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("fp tracker needs eps in (0, 1)");
  phi_ = std::max<uint32_t>(
      1, static_cast<uint32_t>(BitRule::ceil_log2(std::max<uint32_t>(n, 2))));
  alpha_ = std::min(0.5, eps * eps / static_cast<double>(phi_) / phi_ / phi_);
  h_ = draw_subsample_vectors(phi_, n, rng.derive(0));
  covers_.reserve(2 * phi_);
  for (uint32_t l = 0; l < phi_; ++l)
    for (int b = 0; b < 2; ++b)
      covers_.push_back(std::make_unique<WeakCoverTracker>(
          k, n, p, alpha_, eps, m_bound, rng.derive(1).derive(2 * l + b)));
}

uint32_t FpTracker::survival_level(Item j) const {
  uint32_t l = 0;
  while (l < phi_ && h_[l][j]) ++l;
  return l;
}

void FpTracker::on_arrival(uint32_t site, Item item, CommLedger& ledger,
                           const BitRule& rule) {
  if (item >= n_) throw std::out_of_range("item outside universe");
  const uint32_t lstar = survival_level(item);
  // The item sits in u^l for l <= lstar, on branch h_{l+1}: branch 1 below
  // its survival level, branch 0 at it.
  for (uint32_t l = 0; l < lstar && l < phi_; ++l)
    covers_[2 * l + 1]->on_arrival(site, item, ledger, rule);
  if (lstar < phi_) {
    covers_[2 * lstar + 0]->on_arrival(site, item, ledger, rule);
  } else {
    // Survives everything: forward for the exact deepest-level tail.
    ledger.charge(site, rule.bits_per_message());
    tail_counts_.add(item, 1);
  }
}

double FpTracker::estimate() const {
  std::vector<std::pair<Item, double>> tail;
  for (auto [j, c] : tail_counts_.entries())
    tail.emplace_back(j, wide_to_double(pow_wide(c, p_)));
  auto provider = [&](uint32_t level) {
    CoverSet q = covers_[2 * level + 0]->query();
    CoverSet q1 = covers_[2 * level + 1]->query();
    q.pairs.insert(q.pairs.end(), q1.pairs.begin(), q1.pairs.end());
    return q;
  };
  return recursive_sketch(phi_, h_, provider, tail, sign_);
}

uint64_t FpTracker::total_rounds() const {
  uint64_t total = 0;
  for (auto& c : covers_) total += c->rounds().size();
  return total;
}

uint64_t FpTracker::max_rounds_per_cover() const {
  uint64_t mx = 0;
  for (auto& c : covers_) mx = std::max<uint64_t>(mx, c->rounds().size());
  return mx;
}

bool FpTracker::any_failed() const {
  for (auto& c : covers_)
    if (c->failed()) return true;
  return false;
}

}  // namespace distmon
