#include "distmon/hh_tracking.hpp"

#include "distmon/hh_static.hpp"

#include <cmath>
#include <stdexcept>

namespace distmon {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("tracker eps must lie in (0, 1)");
}

}  // namespace

L2HHTracker::L2HHTracker(uint32_t k, double eps, uint64_t m_bound, bool rescale,
                         SeededRng rng)
    : k_(k) {
  check_eps(eps);
  if (k == 0) throw std::invalid_argument("tracker needs at least one site");
  if (rescale) {
    const double guess = eps * static_cast<double>(std::max<uint64_t>(m_bound, 1));
    eps /= std::sqrt(2.0 * std::max(1.0, std::log2(std::max(guess, 2.0))));
  }
  eps_ = eps;
  sites_.resize(k);
  vhat_site_.resize(k);
  for (uint32_t i = 0; i < k; ++i) sites_[i].rng = rng.derive(i);
}

uint64_t L2HHTracker::interval_bound(double eps, double f, uint32_t c) {
  const double raw = std::ceil(eps * eps * f / std::exp2(static_cast<double>(c)));
  if (raw <= 1.0) return 1;
  return static_cast<uint64_t>(raw);
}

void L2HHTracker::draw_threshold(SiteState& st, ItemState& it) const {
  it.bound = interval_bound(eps_, static_cast<double>(st.f_round), it.c);
  it.r = st.rng.next_below(it.bound) + 1;
}

void L2HHTracker::reset_phase_counters(SiteState& st, ItemState& it) const {
  it.w = 0;
  it.delta = 0;
  it.c = 1;
  draw_threshold(st, it);
}

void L2HHTracker::on_arrival(uint32_t site, Item item, CommLedger& ledger,
                             const BitRule& rule) {
  if (site >= k_) throw std::out_of_range("site index out of range");
  SiteState& st = sites_[site];
  auto [pos, inserted] = st.items.try_emplace(item);
  ItemState& it = pos->second;
  if (inserted || it.epoch != st.epoch) {
    // Lazy per-round reset: the tracked count survives, phase state doesn't.
    it.epoch = st.epoch;
    reset_phase_counters(st, it);
  }

  st.f2_live += 2 * it.v + 1;
  it.v += 1;
  it.w += 1;
  it.delta += 1;

  const uint64_t bits = rule.bits_per_message();
  const double phase_len = eps_ * std::sqrt(static_cast<double>(st.f_round));

  // Interval message: the randomized threshold fired.
  if (it.delta == it.r) {
    ledger.charge(site, bits);
    coordinator_apply(
        Message{0, site, item, static_cast<double>(it.bound)});
  }
  // Interval rollover: double the interval length, redraw.
  if (it.delta >= (uint64_t{1} << it.c)) {
    it.c += 1;
    it.delta = 0;
    draw_threshold(st, it);
  }
  // Phase end: resync the exact count.
  if (static_cast<double>(it.w) >= phase_len) {
    ledger.charge(site, bits);
    coordinator_apply(Message{1, site, item, static_cast<double>(it.v)});
    st.phases_in_round += 1;
    reset_phase_counters(st, it);
  }
  // Round end: local F2 doubled since the round began.
  if (st.f2_live >= 2 * st.f_round) {
    st.epoch += 1;
    st.phase_history.push_back(st.phases_in_round);
    st.phases_in_round = 0;
    st.f_round = std::max<uint64_t>(st.f2_live, 1);
  }
}

void L2HHTracker::coordinator_apply(const Message& msg) {
  double& site_est = vhat_site_[msg.site][msg.item];
  if (msg.type == 0) {
    site_est += msg.payload;
    vhat_total_[msg.item] += msg.payload;
  } else {
    vhat_total_[msg.item] += msg.payload - site_est;
    site_est = msg.payload;
  }
}

double L2HHTracker::estimate(Item j) const {
  auto it = vhat_total_.find(j);
  return it == vhat_total_.end() ? 0.0 : it->second;
}

double L2HHTracker::estimate_site(uint32_t site, Item j) const {
  auto it = vhat_site_[site].find(j);
  return it == vhat_site_[site].end() ? 0.0 : it->second;
}

L2HHTracker::ItemView L2HHTracker::state_of(uint32_t site, Item j) const {
  const SiteState& st = sites_.at(site);
  auto it = st.items.find(j);
  if (it == st.items.end() || it->second.epoch != st.epoch) {
    ItemView view;
    if (it != st.items.end()) view.v = it->second.v;
    return view;
  }
  const ItemState& s = it->second;
  return ItemView{s.v, s.w, s.delta, s.c, s.r, s.bound};
}

uint64_t L2HHTracker::round_start_f2(uint32_t site) const {
  return sites_.at(site).f_round;
}

uint64_t L2HHTracker::live_f2(uint32_t site) const {
  return sites_.at(site).f2_live;
}

uint32_t L2HHTracker::phases_in_current_round(uint32_t site) const {
  return sites_.at(site).phases_in_round;
}

const std::vector<uint32_t>& L2HHTracker::completed_round_phases(
    uint32_t site) const {
  return sites_.at(site).phase_history;
}

SumTracker::SumTracker(uint32_t k, int p, double theta)
    : k_(k), p_(p), theta_(theta) {
  if (k == 0) throw std::invalid_argument("tracker needs at least one site");
  if (p < 1) throw std::invalid_argument("sum tracker needs p >= 1");
  if (!(theta > 0.0)) throw std::invalid_argument("sum tracker theta must be > 0");
  sites_.resize(k);
}

void SumTracker::on_arrival(uint32_t site, Item item, CommLedger& ledger,
                            const BitRule& rule) {
  if (site >= k_) throw std::out_of_range("site index out of range");
  SiteState& st = sites_[site];
  const Count c = st.counts.at(item);
  st.fp += pow_wide(c + 1, p_) - pow_wide(c, p_);
  st.counts.add(item, 1);

  const double fp = wide_to_double(st.fp);
  const double last = wide_to_double(st.last_report);
  if (!st.reported || fp >= (1.0 + theta_) * last) {
    ledger.charge(site, rule.bits_per_message());
    reported_sum_ += fp - last;
    st.last_report = st.fp;
    st.reported = true;
    reports_ += 1;
  }
}

LpHHTracker::LpHHTracker(uint32_t k, int p, double eps, uint64_t m_bound,
                         SeededRng rng)
    : k_(k),
      p_(p),
      eps_(eps),
      sum_tracker_(k, p, 0.5),
      raw_counts_(k) {
  check_eps(eps);
  if (p < 2) throw std::invalid_argument("lp tracker needs p >= 2");
  eps_prime_ = std::pow(eps, p / 2.0) /
               (std::exp2(p - 2.0) *
                std::pow(static_cast<double>(k), p / 2.0 - 1.0));
  const uint32_t count =
      static_cast<uint32_t>(BitRule::ceil_log2(std::max<uint64_t>(m_bound, 1))) + 1;
  instances_.reserve(count);
  double tau = 1.0;
  for (uint32_t t = 0; t < count; ++t, tau *= 2.0) {
    const double threshold = eps * tau / k;
    const Count min_count =
        std::max<Count>(1, static_cast<Count>(std::ceil(threshold)));
    instances_.push_back(Instance{
        tau, min_count,
        L2HHTracker(k, eps_prime_, m_bound, /*rescale=*/true, rng.derive(t))});
  }
}

void LpHHTracker::on_arrival(uint32_t site, Item item, CommLedger& ledger,
                             const BitRule& rule) {
  if (site >= k_) throw std::out_of_range("site index out of range");
  sum_tracker_.on_arrival(site, item, ledger, rule);
  raw_counts_[site].add(item, 1);
  const Count raw = raw_counts_[site].at(item);
  // The shifted instance for tau only sees arrivals once the raw local count
  // clears its sparsification floor; it then tracks v_ij - floor + 1.
  for (auto& inst : instances_)
    if (raw >= inst.min_count) inst.tracker.on_arrival(site, item, ledger, rule);
}

double LpHHTracker::lp_prime_estimate() const {
  const double fp = sum_tracker_.estimate();
  return fp > 0.0 ? std::pow(fp, 1.0 / p_) : 0.0;
}

std::optional<uint32_t> LpHHTracker::selected_instance() const {
  const double tau = select_tau(lp_prime_estimate());
  if (tau <= 0.0) return std::nullopt;
  const double idx = std::log2(tau);
  if (idx >= static_cast<double>(instances_.size()))
    return static_cast<uint32_t>(instances_.size()) - 1;
  return static_cast<uint32_t>(idx);
}

double LpHHTracker::estimate(Item j) const {
  auto sel = selected_instance();
  if (!sel) return 0.0;
  const Instance& inst = instances_[*sel];
  double total = 0.0;
  for (uint32_t i = 0; i < k_; ++i) {
    double e = inst.tracker.estimate_site(i, j);
    // Undo the shift: the tracker saw v_ij - floor + 1 arrivals.
    if (e != 0.0) total += e + static_cast<double>(inst.min_count) - 1.0;
  }
  return total;
}

}  // namespace distmon
