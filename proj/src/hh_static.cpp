#include "distmon/hh_static.hpp"

#include <algorithm>
#include <cmath>

namespace distmon {

namespace {

struct SiteProfile {
  // (count, item) sorted by descending count, with prefix F2 sums so a
  // sparsify threshold becomes a prefix cutoff.
  std::vector<std::pair<Count, Item>> entries;
  std::vector<Wide> prefix_f2;

  explicit SiteProfile(const FrequencyVector& v) {
    entries.reserve(v.support_size());
    for (auto [j, c] : v.entries()) entries.emplace_back(c, j);
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first
                                          : a.second < b.second;
              });
    prefix_f2.resize(entries.size() + 1);
    prefix_f2[0] = 0;
    for (size_t i = 0; i < entries.size(); ++i)
      prefix_f2[i + 1] =
          prefix_f2[i] + Wide(entries[i].first) * entries[i].first;
  }

  // Number of entries with count >= threshold.
  size_t cutoff(double threshold) const {
    if (threshold <= 1.0) return entries.size();
    size_t lo = 0, hi = entries.size();
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      if (static_cast<double>(entries[mid].first) >= threshold)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  }
};

// Quadratic sampling pass over the first `keep` entries of one site.
// Accumulates v_ij / p_ij for each sampled item and charges one message per
// send. `shift` is subtracted from each kept count (shifted sparsification).
void sample_site(const SiteProfile& prof, size_t keep, double shift,
                 uint32_t site, double eps, SeededRng& rng,
                 std::map<Item, double>& est, CommLedger& ledger,
                 const BitRule& rule) {
  if (keep == 0) return;
  double f2;
  if (shift == 0.0) {
    f2 = wide_to_double(prof.prefix_f2[keep]);
  } else {
    f2 = 0.0;
    for (size_t i = 0; i < keep; ++i) {
      double c = static_cast<double>(prof.entries[i].first) - shift;
      f2 += c * c;
    }
  }
  if (f2 <= 0.0) return;
  const double scale = 3.0 / (eps * eps * f2);
  const uint64_t bits = rule.bits_per_message();
  for (size_t i = 0; i < keep; ++i) {
    const double c = static_cast<double>(prof.entries[i].first) - shift;
    if (c <= 0.0) continue;
    const double p = std::min(1.0, scale * c * c);
    if (rng.bernoulli(p)) {
      ledger.charge(site, bits);
      est[prof.entries[i].second] += c / p;
    }
  }
}

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("heavy hitter eps must lie in (0, 1)");
}

}  // namespace

HHEstimate l2hh_static(const PartitionedInput& inp, double eps, SeededRng rng,
                       CommLedger& ledger, const BitRule& rule) {
  check_eps(eps);
  HHEstimate out;
  out.eps = eps;
  out.norm = HHEstimate::Norm::l2_prime;
  out.p = 2;
  for (uint32_t i = 0; i < inp.k; ++i) {
    SiteProfile prof(inp.locals[i]);
    SeededRng site_rng = rng.derive(i);
    sample_site(prof, prof.entries.size(), 0.0, i, eps, site_rng,
                out.estimates, ledger, rule);
  }
  return out;
}

HHEstimate lphh_two_round(const PartitionedInput& inp, int p, double eps,
                          SeededRng rng, CommLedger& ledger,
                          const BitRule& rule) {
  check_eps(eps);
  if (p < 2) throw std::invalid_argument("lphh_two_round: p must be >= 2");
  const uint64_t bits = rule.bits_per_message();

  // Round 1: local Fp values up, lp' back down.
  ledger.set_round(0);
  Wide fp_prime = 0;
  for (uint32_t i = 0; i < inp.k; ++i) {
    fp_prime += moments(inp.locals[i], p).fp;
    ledger.charge(i, bits);
  }
  const double lp_prime = std::pow(wide_to_double(fp_prime), 1.0 / p);
  ledger.charge_broadcast(bits);

  // Round 2: sparsify and sample.
  ledger.set_round(1);
  const double threshold = eps * lp_prime / inp.k;
  const double eps_prime =
      std::pow(eps, p / 2.0) / std::pow(static_cast<double>(inp.k), p / 2.0 - 1.0);
  HHEstimate out;
  out.eps = eps;
  out.norm = HHEstimate::Norm::lp_prime;
  out.p = p;
  if (fp_prime == 0) return out;
  for (uint32_t i = 0; i < inp.k; ++i) {
    SiteProfile prof(inp.locals[i]);
    SeededRng site_rng = rng.derive(i);
    sample_site(prof, prof.cutoff(threshold), 0.0, i, eps_prime, site_rng,
                out.estimates, ledger, rule);
  }
  return out;
}

HHEstimate lphh_one_round(const PartitionedInput& inp, int p, double eps,
                          uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                          const BitRule& rule) {
  check_eps(eps);
  if (p < 2) throw std::invalid_argument("lphh_one_round: p must be >= 2");
  const uint64_t bits = rule.bits_per_message();
  const uint32_t instances =
      static_cast<uint32_t>(BitRule::ceil_log2(std::max<uint64_t>(m_bound, 1))) + 1;
  const double eps_prime =
      std::pow(eps, p / 2.0) / std::pow(static_cast<double>(inp.k), p / 2.0 - 1.0);

  // Concurrent Fp exchange fixes which instance the coordinator keeps.
  Wide fp_prime = 0;
  for (uint32_t i = 0; i < inp.k; ++i) {
    fp_prime += moments(inp.locals[i], p).fp;
    ledger.charge(i, bits);
  }
  const double lp_prime = std::pow(wide_to_double(fp_prime), 1.0 / p);

  HHEstimate out;
  out.eps = eps;
  out.norm = HHEstimate::Norm::lp_prime;
  out.p = p;
  if (fp_prime == 0) return out;

  const double tau_sel = select_tau(lp_prime);
  for (uint32_t i = 0; i < inp.k; ++i) {
    SiteProfile prof(inp.locals[i]);
    double tau = 1.0;
    for (uint32_t t = 0; t < instances; ++t, tau *= 2.0) {
      SeededRng site_rng = rng.derive(i).derive(t);
      std::map<Item, double> scratch;
      std::map<Item, double>& sink =
          (tau == tau_sel) ? out.estimates : scratch;
      sample_site(prof, prof.cutoff(eps * tau / inp.k), 0.0, i, eps_prime,
                  site_rng, sink, ledger, rule);
    }
  }
  return out;
}

HHEstimate median_boost(const EstimatorRunner& runner, uint32_t reps,
                        SeededRng rng, CommLedger& ledger) {
  if (reps < 1 || reps % 2 == 0)
    throw std::invalid_argument("median_boost: reps must be odd and >= 1");
  if (reps == 1) return runner(rng.derive(0), ledger);

  std::vector<HHEstimate> runs;
  runs.reserve(reps);
  std::map<Item, std::vector<double>> values;
  for (uint32_t r = 0; r < reps; ++r) {
    runs.push_back(runner(rng.derive(r), ledger));
    for (auto& [j, v] : runs.back().estimates) values[j].push_back(v);
  }
  HHEstimate out = runs.front();
  out.estimates.clear();
  for (auto& [j, vals] : values) {
    vals.resize(reps, 0.0);  // runs that never sampled j estimated it as 0
    auto mid = vals.begin() + reps / 2;
    std::nth_element(vals.begin(), mid, vals.end());
    if (*mid != 0.0) out.estimates[j] = *mid;
  }
  return out;
}

double select_tau(double x) {
  if (x <= 0.0) return 0.0;
  return std::exp2(std::floor(std::log2(x)));
}

}  // namespace distmon
