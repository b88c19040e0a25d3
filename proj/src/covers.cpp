#include "distmon/covers.hpp"

#include <algorithm>
#include <cmath>

namespace distmon {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("cover alpha must lie in (0, 1)");
}

// Top-K positive estimates by value (ties by smaller index).
std::vector<std::pair<Item, double>> top_estimates(const HHEstimate& est,
                                                   uint64_t cap) {
  std::vector<std::pair<Item, double>> items;
  items.reserve(est.estimates.size());
  for (auto& [j, v] : est.estimates)
    if (v > 0.0) items.emplace_back(j, v);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (items.size() > cap) items.resize(cap);
  return items;
}

HHEstimate boosted_one_round_lphh(const PartitionedInput& inp, int p,
                                  double eps, uint32_t n, uint64_t m_bound,
                                  SeededRng rng, CommLedger& ledger,
                                  const BitRule& rule) {
  auto runner = [&](SeededRng r, CommLedger& led) {
    return lphh_one_round(inp, p, eps, m_bound, r, led, rule);
  };
  return median_boost(runner, cover_boost_reps(n), rng, ledger);
}

}  // namespace

uint32_t cover_boost_reps(uint32_t n) {
  uint32_t reps = static_cast<uint32_t>(
      std::ceil(48.0 * std::log(std::max<uint32_t>(n, 2))));
  return reps | 1u;
}

uint64_t cover_size_cap(int p, double alpha) {
  double cap = std::pow(4.0, p) / alpha + 1.0;
  if (cap > 1e18) return UINT64_MAX;
  return static_cast<uint64_t>(cap);
}

CoverSet cover_two_round(const PartitionedInput& inp, int p, double alpha,
                         uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                         const BitRule& rule) {
  check_alpha(alpha);
  const double eps_hh = std::min(0.999, std::pow(alpha, 1.0 / p) / 4.0);
  HHEstimate est = boosted_one_round_lphh(inp, p, eps_hh, rule.n, m_bound,
                                          rng, ledger, rule);
  auto selected = top_estimates(est, cover_size_cap(p, alpha) - 1);

  // Second round: broadcast the index set, collect exact counts.
  const uint64_t bits = rule.bits_per_message();
  CoverSet cover;
  cover.alpha = alpha;
  cover.eps = 0.0;
  cover.exact_values = true;
  for (auto& [j, ignored] : selected) {
    (void)ignored;
    ledger.charge_broadcast(bits);
    Count vj = 0;
    for (uint32_t i = 0; i < inp.k; ++i) {
      Count c = inp.locals[i].at(j);
      if (c > 0) {
        ledger.charge(i, bits);
        vj += c;
      }
    }
    cover.pairs.emplace_back(j, wide_to_double(pow_wide(vj, p)));
  }
  return cover;
}

CoverSet cover_one_round(const PartitionedInput& inp, int p, double alpha,
                         double eps, uint64_t m_bound, SeededRng rng,
                         CommLedger& ledger, const BitRule& rule) {
  check_alpha(alpha);
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("cover eps must lie in (0, 1)");
  const double eps_hh =
      std::min(0.999, std::pow(alpha, 1.0 / p) * eps / (8.0 * p));
  HHEstimate est = boosted_one_round_lphh(inp, p, eps_hh, rule.n, m_bound,
                                          rng, ledger, rule);
  auto selected = top_estimates(est, cover_size_cap(p, alpha) - 1);

  CoverSet cover;
  cover.alpha = alpha;
  cover.eps = eps;
  cover.exact_values = false;
  for (auto& [j, vhat] : selected)
    cover.pairs.emplace_back(j, std::pow(vhat, p));
  return cover;
}

std::vector<std::vector<uint8_t>> draw_subsample_vectors(uint32_t phi,
                                                         uint32_t n,
                                                         SeededRng rng) {
  std::vector<std::vector<uint8_t>> h(phi, std::vector<uint8_t>(n, 0));
  for (uint32_t l = 0; l < phi; ++l) {
    SeededRng level_rng = rng.derive(l);
    for (uint32_t e = 0; e < n; ++e)
      h[l][e] = static_cast<uint8_t>(level_rng.next() & 1u);
  }
  return h;
}

double recursive_sketch(
    uint32_t phi, const std::vector<std::vector<uint8_t>>& h,
    const std::function<CoverSet(uint32_t level)>& cover_provider,
    const std::vector<std::pair<Item, double>>& tail, RecursionSign sign) {
  if (phi < 1) throw std::invalid_argument("recursive_sketch: phi must be >= 1");
  if (h.size() != phi)
    throw std::invalid_argument("recursive_sketch: need phi subsample vectors");
  if (tail.size() > 100) return 0.0;

  double y = 0.0;
  for (auto& [j, u] : tail) {
    (void)j;
    y += u;
  }
  for (uint32_t l = phi; l-- > 0;) {
    CoverSet q = cover_provider(l);
    double correction = 0.0;
    for (auto& [i, w] : q.pairs)
      correction += (1.0 - 2.0 * h[l][i]) * w;
    if (sign == RecursionSign::plus)
      y = 2.0 * y + correction;
    else
      y = 2.0 * y - correction;
  }
  return y;
}

PartitionedInput restrict_input(const PartitionedInput& inp,
                                const std::function<bool(Item)>& keep) {
  PartitionedInput out(inp.k, inp.n);
  for (uint32_t i = 0; i < inp.k; ++i)
    for (auto [j, c] : inp.locals[i].entries())
      if (keep(j)) out.locals[i].add(j, c);
  return out;
}

double fp_static(const PartitionedInput& inp, int p, double eps, int rounds,
                 uint64_t m_bound, SeededRng rng, CommLedger& ledger,
                 const BitRule& rule, RecursionSign sign) {
  if (p < 2) throw std::invalid_argument("fp_static: p must be >= 2");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("fp_static: eps must lie in (0, 1)");
  if (rounds != 1 && rounds != 2)
    throw std::invalid_argument("fp_static: rounds must be 1 or 2");

  const uint32_t phi = std::max<uint32_t>(
      1, static_cast<uint32_t>(BitRule::ceil_log2(std::max<uint32_t>(inp.n, 2))));
  auto h = draw_subsample_vectors(phi, inp.n, rng.derive(0));
  const double alpha =
      std::min(0.5, eps * eps / static_cast<double>(phi) / phi / phi);

  // Survival level of each item: largest l with h_1..h_l all one.
  auto survives = [&](Item j, uint32_t level) {
    for (uint32_t l = 0; l < level; ++l)
      if (!h[l][j]) return false;
    return true;
  };

  auto cover_provider = [&](uint32_t level) {
    PartitionedInput sub =
        restrict_input(inp, [&](Item j) { return survives(j, level); });
    SeededRng cover_rng = rng.derive(1).derive(level);
    if (rounds == 2)
      return cover_two_round(sub, p, alpha, m_bound, cover_rng, ledger, rule);
    return cover_one_round(sub, p, alpha, eps, m_bound, cover_rng, ledger,
                           rule);
  };

  // Deepest level: sites forward every surviving item; the coordinator
  // reconstructs u^phi exactly.
  const uint64_t bits = rule.bits_per_message();
  FrequencyVector tail_counts;
  for (uint32_t i = 0; i < inp.k; ++i) {
    for (auto [j, c] : inp.locals[i].entries()) {
      if (!survives(j, phi)) continue;
      ledger.charge(i, bits);
      tail_counts.add(j, c);
    }
  }
  std::vector<std::pair<Item, double>> tail;
  for (auto [j, c] : tail_counts.entries())
    tail.emplace_back(j, wide_to_double(pow_wide(c, p)));

  return recursive_sketch(phi, h, cover_provider, tail, sign);
}

}  // namespace distmon
