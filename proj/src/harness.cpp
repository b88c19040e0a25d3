#include "distmon/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "distmon/covers.hpp"
#include "distmon/fp_tracking.hpp"
#include "distmon/hh_static.hpp"
#include "distmon/hh_tracking.hpp"

namespace distmon {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

GeneratorSpec GeneratorSpec::parse(const std::string& text) {
  std::string t = trim(text);
  std::string name = t;
  std::string args;
  size_t open = t.find('(');
  if (open != std::string::npos) {
    if (t.back() != ')')
      throw std::invalid_argument("generator: unbalanced parentheses: " + text);
    name = trim(t.substr(0, open));
    args = t.substr(open + 1, t.size() - open - 2);
  }
  GeneratorSpec spec;
  if (name == "zipf") {
    spec.kind = GeneratorKind::zipf;
    if (!args.empty()) spec.zipf_s = std::stod(args);
    if (!(spec.zipf_s > 0.0))
      throw std::invalid_argument("zipf exponent must be positive");
  } else if (name == "uniform") {
    spec.kind = GeneratorKind::uniform;
  } else if (name == "planted_hh") {
    spec.kind = GeneratorKind::planted_hh;
    size_t comma = args.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("planted_hh needs (count, share)");
    spec.planted_count =
        static_cast<uint32_t>(std::stoul(trim(args.substr(0, comma))));
    spec.planted_share = std::stod(trim(args.substr(comma + 1)));
    if (spec.planted_count == 0 || !(spec.planted_share > 0.0) ||
        spec.planted_count * spec.planted_share > 1.0)
      throw std::invalid_argument("planted_hh shares must fit in the stream");
  } else if (name == "equal_split") {
    spec.kind = GeneratorKind::equal_split;
  } else {
    throw std::invalid_argument("unknown generator: " + text);
  }
  return spec;
}

std::string GeneratorSpec::to_string() const {
  switch (kind) {
    case GeneratorKind::zipf:
      return "zipf(" + fmt(zipf_s) + ")";
    case GeneratorKind::uniform:
      return "uniform";
    case GeneratorKind::planted_hh:
      return "planted_hh(" + std::to_string(planted_count) + "," +
             fmt(planted_share) + ")";
    case GeneratorKind::equal_split:
      return "equal_split";
  }
  return "?";
}

std::vector<StreamEvent> generate_stream(const GeneratorSpec& spec, uint32_t k,
                                         uint32_t n, uint64_t m,
                                         SeededRng rng) {
  if (k == 0 || n == 0) throw std::invalid_argument("need k, n >= 1");
  std::vector<StreamEvent> events;
  events.reserve(m);
  auto push = [&](Item j, uint32_t site) {
    events.push_back(StreamEvent{events.size() + 1, site, j});
  };

  switch (spec.kind) {
    case GeneratorKind::zipf: {
      std::vector<double> cum(n);
      double total = 0.0;
      for (uint32_t r = 0; r < n; ++r) {
        total += std::pow(static_cast<double>(r + 1), -spec.zipf_s);
        cum[r] = total;
      }
      for (uint64_t t = 0; t < m; ++t) {
        double x = rng.next_double() * total;
        auto it = std::lower_bound(cum.begin(), cum.end(), x);
        Item j = static_cast<Item>(std::min<size_t>(it - cum.begin(), n - 1));
        push(j, static_cast<uint32_t>(rng.next_below(k)));
      }
      break;
    }
    case GeneratorKind::uniform: {
      for (uint64_t t = 0; t < m; ++t)
        push(static_cast<Item>(rng.next_below(n)),
             static_cast<uint32_t>(rng.next_below(k)));
      break;
    }
    case GeneratorKind::planted_hh: {
      const uint64_t each = static_cast<uint64_t>(spec.planted_share * m);
      const uint32_t planted = std::min(spec.planted_count, n);
      if (each * planted > m)
        throw std::invalid_argument("planted mass exceeds stream length");
      std::vector<Item> items;
      items.reserve(m);
      for (uint32_t j = 0; j < planted; ++j)
        items.insert(items.end(), each, j);
      const uint32_t rest_lo = planted < n ? planted : 0;
      while (items.size() < m)
        items.push_back(static_cast<Item>(
            rest_lo + rng.next_below(n - rest_lo)));
      for (size_t i = items.size(); i > 1; --i)
        std::swap(items[i - 1], items[rng.next_below(i)]);
      for (Item j : items)
        push(j, static_cast<uint32_t>(rng.next_below(k)));
      break;
    }
    case GeneratorKind::equal_split: {
      // Equal global frequencies, copies dealt round-robin over sites; the
      // many-small-items regime that saturates the Holder step.
      const uint64_t base = m / n;
      const uint64_t extra = m % n;
      for (uint64_t c = 0; c <= base; ++c) {
        for (uint32_t j = 0; j < n; ++j) {
          const uint64_t freq = base + (j < extra ? 1 : 0);
          if (c >= freq) continue;
          push(j, static_cast<uint32_t>(c % k));
        }
      }
      break;
    }
  }
  return events;
}

std::vector<Item> heavy_set(const FrequencyVector& v, int p, double alpha) {
  std::vector<Item> out;
  const double fp = wide_to_double(moments(v, p).fp);
  for (auto [j, c] : v.entries())
    if (wide_to_double(pow_wide(c, p)) >= alpha * fp) out.push_back(j);
  return out;
}

CountSketch::CountSketch(const PartitionedInput& inp, double eps,
                         SeededRng rng, CommLedger& ledger,
                         const BitRule& rule) {
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("count sketch eps must lie in (0, 1)");
  width_ = std::max<uint32_t>(1, static_cast<uint32_t>(std::ceil(2.0 / (eps * eps))));
  salt_ = rng.next();
  table_.assign(kDepth, std::vector<double>(width_, 0.0));
  const uint64_t bits = rule.bits_per_message();
  for (uint32_t i = 0; i < inp.k; ++i) {
    // One counter per cell crosses the wire.
    ledger.charge_many(i, uint64_t{kDepth} * width_, bits);
    for (auto [j, c] : inp.locals[i].entries())
      for (uint32_t row = 0; row < kDepth; ++row)
        table_[row][bucket(row, j)] += sign(row, j) * static_cast<double>(c);
  }
}

uint32_t CountSketch::bucket(uint32_t row, Item j) const {
  return static_cast<uint32_t>(
      SeededRng::mix64(salt_ ^ (uint64_t{row} * 0x9e3779b97f4a7c15ull + j)) %
      width_);
}

double CountSketch::sign(uint32_t row, Item j) const {
  uint64_t h = SeededRng::mix64(
      ~salt_ ^ (uint64_t{row} * 0xbf58476d1ce4e5b9ull + j));
  return (h >> 63) ? 1.0 : -1.0;
}

double CountSketch::estimate(Item j) const {
  std::vector<double> vals(kDepth);
  for (uint32_t row = 0; row < kDepth; ++row)
    vals[row] = sign(row, j) * table_[row][bucket(row, j)];
  std::nth_element(vals.begin(), vals.begin() + kDepth / 2, vals.end());
  return vals[kDepth / 2];
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("fit_slope needs matched series, length >= 2");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("fit_slope needs positive values");
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("fit_slope: degenerate xs");
  return (n * sxy - sx * sy) / denom;
}

void ExperimentConfig::validate() const {
  static const char* known[] = {"l2hh",      "lphh2",     "lphh1",
                                "countsketch", "fpstatic1", "fpstatic2",
                                "l2track",   "lptrack",   "fptrack"};
  bool ok = false;
  for (const char* name : known) ok = ok || protocol == name;
  if (!ok) throw std::invalid_argument("unknown protocol: " + protocol);
  if (k == 0 || n == 0 || m == 0 || trials == 0 || checkpoints == 0)
    throw std::invalid_argument("k, n, m, trials, checkpoints must be positive");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("eps must lie in (0, 1)");
  if (p < 2) throw std::invalid_argument("p must be >= 2");
}

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{{"protocol", protocol},
                        {"k", k},
                        {"n", n},
                        {"p", p},
                        {"eps", eps},
                        {"m", m},
                        {"generator", generator.to_string()},
                        {"trials", trials},
                        {"seed", seed},
                        {"checkpoints", checkpoints}};
}

namespace {

struct Row {
  uint32_t trial;
  uint32_t checkpoint;
  int64_t item;  // -1 for whole-moment rows
  double estimate;
  double exact;
  double bound;
  bool ok;
  uint64_t bits;
  uint64_t messages;
  uint64_t rounds;
};

std::vector<Item> top_items(const FrequencyVector& v, size_t count) {
  std::vector<std::pair<Count, Item>> entries;
  for (auto [j, c] : v.entries()) entries.emplace_back(c, j);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (entries.size() > count) entries.resize(count);
  std::vector<Item> out;
  for (auto& [c, j] : entries) out.push_back(j);
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const BitRule rule{cfg.n, cfg.k};
  const bool tracking = cfg.protocol == "l2track" ||
                        cfg.protocol == "lptrack" || cfg.protocol == "fptrack";
  std::vector<Row> rows;

  for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
    SeededRng base(cfg.seed, trial);
    auto events =
        generate_stream(cfg.generator, cfg.k, cfg.n, cfg.m, base.derive(0));
    SeededRng proto_rng = base.derive(1);
    CommLedger ledger(cfg.k);

    if (!tracking) {
      PartitionedInput inp = accumulate(events, cfg.k, cfg.n);
      auto push_item_rows = [&](const std::function<double(Item)>& est,
                                double bound) {
        for (Item j : top_items(inp.global(), 10)) {
          const double exact = static_cast<double>(inp.global().at(j));
          const double e = est(j);
          rows.push_back(Row{trial, 0, static_cast<int64_t>(j), e, exact,
                             bound, std::abs(e - exact) <= bound,
                             ledger.total_bits(), ledger.total_messages(), 0});
        }
      };
      if (cfg.protocol == "l2hh") {
        auto est = l2hh_static(inp, cfg.eps, proto_rng, ledger, rule);
        const auto ms = partition_moments(inp, 2);
        push_item_rows([&](Item j) { return est.at(j); },
                       cfg.eps * ms.lp_prime);
      } else if (cfg.protocol == "lphh2" || cfg.protocol == "lphh1") {
        auto est = cfg.protocol == "lphh2"
                       ? lphh_two_round(inp, cfg.p, cfg.eps, proto_rng, ledger,
                                        rule)
                       : lphh_one_round(inp, cfg.p, cfg.eps, cfg.m, proto_rng,
                                        ledger, rule);
        const auto ms = partition_moments(inp, cfg.p);
        push_item_rows([&](Item j) { return est.at(j); },
                       2.0 * cfg.eps * ms.lp_prime);
      } else if (cfg.protocol == "countsketch") {
        CountSketch cs(inp, cfg.eps, proto_rng, ledger, rule);
        const auto ms = partition_moments(inp, 2);
        push_item_rows([&](Item j) { return cs.estimate(j); },
                       cfg.eps * ms.lp_prime);
      } else {  // fpstatic1 / fpstatic2
        const int rounds_mode = cfg.protocol == "fpstatic2" ? 2 : 1;
        const double est = fp_static(inp, cfg.p, cfg.eps, rounds_mode, cfg.m,
                                     proto_rng, ledger, rule);
        const double exact = wide_to_double(moments(inp.global(), cfg.p).fp);
        const double bound = cfg.eps * exact;
        rows.push_back(Row{trial, 0, -1, est, exact, bound,
                           std::abs(est - exact) <= bound, ledger.total_bits(),
                           ledger.total_messages(),
                           static_cast<uint64_t>(rounds_mode)});
      }
      continue;
    }

    // Tracking protocols: evenly spaced checkpoints over event times.
    std::set<uint64_t> query_times;
    for (uint32_t c = 1; c <= cfg.checkpoints; ++c)
      query_times.insert(cfg.m * c / cfg.checkpoints);
    const auto watch = top_items(accumulate(events, cfg.k, cfg.n).global(), 5);

    std::unique_ptr<TrackingProtocol> proto;
    L2HHTracker* l2 = nullptr;
    LpHHTracker* lp = nullptr;
    FpTracker* fp = nullptr;
    if (cfg.protocol == "l2track") {
      auto t = std::make_unique<L2HHTracker>(cfg.k, cfg.eps, cfg.m, true,
                                             proto_rng);
      l2 = t.get();
      proto = std::move(t);
    } else if (cfg.protocol == "lptrack") {
      auto t =
          std::make_unique<LpHHTracker>(cfg.k, cfg.p, cfg.eps, cfg.m, proto_rng);
      lp = t.get();
      proto = std::move(t);
    } else {
      auto t = std::make_unique<FpTracker>(cfg.k, cfg.n, cfg.p, cfg.eps, cfg.m,
                                           proto_rng);
      fp = t.get();
      proto = std::move(t);
    }

    uint32_t checkpoint = 0;
    run_tracking(events, *proto, query_times, rule, ledger,
                 [&](uint64_t t) {
                   PartitionedInput prefix =
                       accumulate(events, cfg.k, cfg.n, t);
                   if (fp) {
                     const double exact =
                         wide_to_double(moments(prefix.global(), cfg.p).fp);
                     const double est = fp->estimate();
                     const double bound = cfg.eps * exact;
                     rows.push_back(Row{trial, checkpoint, -1, est, exact,
                                        bound, std::abs(est - exact) <= bound,
                                        ledger.total_bits(),
                                        ledger.total_messages(),
                                        fp->total_rounds()});
                   } else {
                     const auto ms =
                         partition_moments(prefix, l2 ? 2 : cfg.p);
                     const double bound = l2 ? cfg.eps * ms.lp_prime
                                             : 3.0 * cfg.eps * ms.lp_prime;
                     for (Item j : watch) {
                       const double exact =
                           static_cast<double>(prefix.global().at(j));
                       const double est =
                           l2 ? l2->estimate(j) : lp->estimate(j);
                       rows.push_back(Row{trial, checkpoint,
                                          static_cast<int64_t>(j), est, exact,
                                          bound,
                                          std::abs(est - exact) <= bound,
                                          ledger.total_bits(),
                                          ledger.total_messages(), 0});
                     }
                   }
                   ++checkpoint;
                 });
  }

  // Fixed, versioned CSV layout: no timestamps, no environment leakage.
  std::string csv = "# distmon-csv v1\n";
  csv += "trial,checkpoint,item,estimate,exact,bound,ok,bits,messages,rounds\n";
  double cov = 0.0, bits_sum = 0.0, msg_sum = 0.0;
  double est_sum = 0.0, est_sq = 0.0;
  for (const Row& r : rows) {
    csv += std::to_string(r.trial) + "," + std::to_string(r.checkpoint) + "," +
           std::to_string(r.item) + "," + fmt(r.estimate) + "," +
           fmt(r.exact) + "," + fmt(r.bound) + "," + (r.ok ? "1" : "0") + "," +
           std::to_string(r.bits) + "," + std::to_string(r.messages) + "," +
           std::to_string(r.rounds) + "\n";
    cov += r.ok ? 1.0 : 0.0;
    bits_sum += static_cast<double>(r.bits);
    msg_sum += static_cast<double>(r.messages);
    est_sum += r.estimate;
    est_sq += r.estimate * r.estimate;
  }
  const double nrows = rows.empty() ? 1.0 : static_cast<double>(rows.size());

  ExperimentResult out;
  out.csv = csv;
  out.coverage_rate = cov / nrows;
  out.mean_bits = bits_sum / nrows;
  char run_id[20];
  std::snprintf(run_id, sizeof(run_id), "%016llx",
                static_cast<unsigned long long>(fnv1a(csv)));
  out.aggregate = nlohmann::json{
      {"config", cfg.to_json()},
      {"run_id", run_id},
      {"rows", rows.size()},
      {"coverage_rate", out.coverage_rate},
      {"mean_bits", out.mean_bits},
      {"mean_messages", msg_sum / nrows},
      {"mean_estimate", est_sum / nrows},
      {"var_estimate",
       est_sq / nrows - (est_sum / nrows) * (est_sum / nrows)}};
  return out;
}

}  // namespace distmon
