#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "distmon/harness.hpp"

using namespace distmon;

namespace {

std::map<Item, Count> global_counts(const std::vector<StreamEvent>& events) {
  std::map<Item, Count> freq;
  for (auto& ev : events) ++freq[ev.item];
  return freq;
}

// Parses the ok column (index 6) of every data row.
std::pair<int, int> ok_tally(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  int ok = 0, total = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("trial,", 0) == 0)
      continue;
    std::istringstream row(line);
    std::string field;
    for (int i = 0; i <= 6; ++i) std::getline(row, field, ',');
    ++total;
    if (field == "1") ++ok;
  }
  return {ok, total};
}

}  // namespace

TEST_CASE("generator spec parsing") {
  auto z = GeneratorSpec::parse("zipf(1.4)");
  CHECK(z.kind == GeneratorKind::zipf);
  CHECK(z.zipf_s == doctest::Approx(1.4));
  CHECK(GeneratorSpec::parse("zipf").zipf_s == doctest::Approx(1.1));
  CHECK(GeneratorSpec::parse("uniform").kind == GeneratorKind::uniform);
  auto ph = GeneratorSpec::parse("planted_hh(3,0.2)");
  CHECK(ph.planted_count == 3);
  CHECK(ph.planted_share == doctest::Approx(0.2));
  CHECK(GeneratorSpec::parse("equal_split").kind == GeneratorKind::equal_split);

  CHECK_THROWS_AS(GeneratorSpec::parse("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(GeneratorSpec::parse("zipf(x)"), std::invalid_argument);
  CHECK_THROWS_AS(GeneratorSpec::parse(""), std::invalid_argument);

  // Round trip through to_string.
  auto back = GeneratorSpec::parse(ph.to_string());
  CHECK(back.planted_count == 3);
  CHECK(back.planted_share == doctest::Approx(0.2));
}

TEST_CASE("streams have strictly increasing times and valid ranges") {
  auto events = generate_stream(GeneratorSpec::parse("zipf(1.1)"), 3, 16, 500,
                                SeededRng(1));
  REQUIRE(events.size() == 500);
  for (size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].time == i + 1);
    CHECK(events[i].site < 3);
    CHECK(events[i].item < 16);
  }
}

TEST_CASE("planted generator hits the exact planted frequency") {
  auto events = generate_stream(GeneratorSpec::parse("planted_hh(1,0.5)"), 4,
                                16, 1000, SeededRng(7));
  auto freq = global_counts(events);
  CHECK(freq[0] == 500);
  Count rest = 0;
  for (auto& [j, c] : freq)
    if (j != 0) rest += c;
  CHECK(rest == 500);
}

TEST_CASE("equal split deals every item evenly across sites") {
  const uint32_t k = 2, n = 4;
  auto events = generate_stream(GeneratorSpec::parse("equal_split"), k, n, 16,
                                SeededRng(0));
  // 16 arrivals over 4 items: 4 each, 2 per site per item.
  std::map<std::pair<uint32_t, Item>, Count> cell;
  for (auto& ev : events) ++cell[{ev.site, ev.item}];
  for (uint32_t s = 0; s < k; ++s)
    for (Item j = 0; j < n; ++j) CHECK(cell[{s, j}] == 2);
}

TEST_CASE("zipf skews toward low ranks") {
  auto events = generate_stream(GeneratorSpec::parse("zipf(1.3)"), 2, 16, 5000,
                                SeededRng(3));
  auto freq = global_counts(events);
  CHECK(freq[0] > freq[15]);
  CHECK(freq[0] > 5000 / 16);
}

TEST_CASE("heavy set") {
  auto v = FrequencyVector::from_pairs({{0, 4}, {1, 2}, {2, 2}});
  // p = 2: F2 = 24; only 16 >= 0.5 * 24.
  auto h = heavy_set(v, 2, 0.5);
  REQUIRE(h.size() == 1);
  CHECK(h[0] == 0);
  CHECK(heavy_set(v, 2, 1.0).empty());
  CHECK(heavy_set(FrequencyVector{}, 2, 0.1).empty());
}

TEST_CASE("count sketch width and accuracy") {
  auto events = generate_stream(GeneratorSpec::parse("zipf(1.1)"), 4, 64, 4000,
                                SeededRng(21));
  auto inp = accumulate(events, 4, 64);
  auto ms = partition_moments(inp, 2);
  const double eps = 0.3;
  BitRule rule{64, 4};
  CommLedger ledger(4);
  CountSketch cs(inp, eps, SeededRng(5), ledger, rule);
  CHECK(cs.width() == static_cast<uint32_t>(std::ceil(2.0 / (eps * eps))));
  CHECK(ledger.total_messages() == 4ull * cs.width() * CountSketch::kDepth);
  int within = 0;
  for (Item j = 0; j < 10; ++j) {
    const double exact = static_cast<double>(inp.global().at(j));
    if (std::abs(cs.estimate(j) - exact) <= eps * ms.lp_prime) ++within;
  }
  CHECK(within >= 8);
}

TEST_CASE("slope fitting recovers an exact power law") {
  CHECK(fit_slope({2, 4, 8}, {12, 48, 192}) == doctest::Approx(2.0));
  CHECK(fit_slope({1, 2, 4, 8}, {5, 5, 5, 5}) == doctest::Approx(0.0));
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  cfg.protocol = "l2hh";
  cfg.validate();
  cfg.protocol = "nope";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.protocol = "l2hh";
  cfg.eps = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("single planted item is recovered exactly") {
  ExperimentConfig cfg;
  cfg.protocol = "l2hh";
  cfg.k = 4;
  cfg.n = 16;
  cfg.m = 400;
  cfg.eps = 0.3;
  cfg.trials = 1;
  cfg.seed = 42;
  cfg.generator = GeneratorSpec::parse("planted_hh(1,1.0)");
  auto res = run_experiment(cfg);
  CHECK(res.coverage_rate == doctest::Approx(1.0));
}

TEST_CASE("experiment output is byte-identical across reruns") {
  for (const char* proto : {"l2hh", "lphh1", "l2track"}) {
    ExperimentConfig cfg;
    cfg.protocol = proto;
    cfg.k = 3;
    cfg.n = 32;
    cfg.p = proto == std::string("lphh1") ? 3 : 2;
    cfg.m = 500;
    cfg.eps = 0.4;
    cfg.trials = 3;
    cfg.seed = 99;
    cfg.checkpoints = 4;
    auto a = run_experiment(cfg);
    auto b = run_experiment(cfg);
    CHECK(a.csv == b.csv);
    CHECK(a.aggregate.dump() == b.aggregate.dump());
    CHECK(a.csv.rfind("# distmon-csv v1", 0) == 0);
  }
}

TEST_CASE("aggregate coverage matches a recount of the csv rows") {
  ExperimentConfig cfg;
  cfg.protocol = "l2hh";
  cfg.k = 4;
  cfg.n = 64;
  cfg.m = 2000;
  cfg.eps = 0.3;
  cfg.trials = 5;
  cfg.seed = 12;
  auto res = run_experiment(cfg);
  auto [ok, total] = ok_tally(res.csv);
  REQUIRE(total > 0);
  CHECK(res.coverage_rate ==
        doctest::Approx(static_cast<double>(ok) / total));
  CHECK(res.aggregate["coverage_rate"].get<double>() ==
        doctest::Approx(res.coverage_rate));
  CHECK(res.aggregate.contains("run_id"));
}

TEST_CASE("tracking protocols emit one row block per checkpoint") {
  ExperimentConfig cfg;
  cfg.protocol = "l2track";
  cfg.k = 2;
  cfg.n = 16;
  cfg.m = 300;
  cfg.eps = 0.4;
  cfg.trials = 2;
  cfg.seed = 5;
  cfg.checkpoints = 6;
  auto res = run_experiment(cfg);
  auto [ok, total] = ok_tally(res.csv);
  CHECK(total == 2 * 6 * 5);  // trials x checkpoints x watched items
  CHECK(ok >= 0);
}
