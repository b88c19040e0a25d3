#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "distmon/harness.hpp"
#include "distmon/hh_static.hpp"
#include "distmon/netsim.hpp"

using namespace distmon;

namespace {

PartitionedInput m1() {
  PartitionedInput inp(2, 2);
  inp.locals[0].add(0, 3);
  inp.locals[1].add(0, 1);
  inp.locals[1].add(1, 2);
  return inp;
}

struct SilentSites : RoundProtocol {
  std::vector<Message> site_step(uint32_t, uint32_t,
                                 const std::vector<Message>&) override {
    return {};
  }
  CoordinatorResult coordinator_step(
      uint32_t round, const std::vector<std::vector<Message>>&) override {
    CoordinatorResult res;
    if (round == 0) {
      res.broadcast.push_back(Message{0, 0, 0, 1.0});
      return res;
    }
    res.done = true;
    return res;
  }
};

struct Echo : RoundProtocol {
  uint32_t rounds;
  explicit Echo(uint32_t r) : rounds(r) {}
  std::vector<Message> site_step(uint32_t round, uint32_t site,
                                 const std::vector<Message>&) override {
    return {Message{0, site, 0, static_cast<double>(round)}};
  }
  CoordinatorResult coordinator_step(
      uint32_t round, const std::vector<std::vector<Message>>&) override {
    CoordinatorResult res;
    res.done = round + 1 >= rounds;
    return res;
  }
};

struct NeverDone : RoundProtocol {
  std::vector<Message> site_step(uint32_t, uint32_t,
                                 const std::vector<Message>&) override {
    return {};
  }
  CoordinatorResult coordinator_step(
      uint32_t, const std::vector<std::vector<Message>>&) override {
    return {};
  }
  uint32_t round_limit() const override { return 8; }
};

// The l2 sampling estimator phrased as a one-round protocol.
struct SamplingRound : RoundProtocol {
  const PartitionedInput& inp;
  double eps;
  SeededRng rng;
  SamplingRound(const PartitionedInput& i, double e, SeededRng r)
      : inp(i), eps(e), rng(r) {}

  std::vector<Message> site_step(uint32_t round, uint32_t site,
                                 const std::vector<Message>&) override {
    std::vector<Message> out;
    if (round != 0) return out;
    const double f2 =
        wide_to_double(moments(inp.locals[site], 2).fp);
    if (f2 <= 0.0) return out;
    SeededRng site_rng = rng.derive(site);
    for (auto [j, c] : inp.locals[site].entries()) {
      const double p =
          std::min(1.0, 3.0 * double(c) * double(c) / (eps * eps * f2));
      if (site_rng.bernoulli(p))
        out.push_back(Message{0, site, j, static_cast<double>(c) / p});
    }
    return out;
  }
  CoordinatorResult coordinator_step(
      uint32_t, const std::vector<std::vector<Message>>&) override {
    CoordinatorResult res;
    res.done = true;
    return res;
  }
};

struct ForwardAll : TrackingProtocol {
  uint64_t forwarded = 0;
  void on_event(const StreamEvent& ev, CommLedger& ledger,
                const BitRule& rule) override {
    ledger.charge(ev.site, rule.bits_per_message());
    ++forwarded;
  }
};

}  // namespace

TEST_CASE("silent sites charge only broadcasts") {
  SilentSites proto;
  BitRule rule{2, 2};
  CommLedger ledger(2);
  run_rounds(proto, rule, ledger);
  // One broadcast message, charged once per site.
  CHECK(ledger.total_messages() == 2);
  CHECK(ledger.total_bits() == 2 * rule.bits_per_message());
}

TEST_CASE("two-round echo attributes bits to two rounds") {
  Echo proto(2);
  BitRule rule{2, 3};
  CommLedger ledger(3);
  run_rounds(proto, rule, ledger);
  CHECK(ledger.per_round_bits().size() == 2);
}

TEST_CASE("round limit enforcement") {
  NeverDone proto;
  BitRule rule{2, 1};
  CommLedger ledger(1);
  CHECK_THROWS_AS(run_rounds(proto, rule, ledger), ProtocolDivergence);
}

TEST_CASE("sampling round on the small instance sends at most 4 values") {
  auto inp = m1();
  BitRule rule{2, 2};
  for (uint64_t seed = 0; seed < 64; ++seed) {
    SamplingRound proto(inp, 0.9, SeededRng(seed));
    CommLedger ledger(2);
    run_rounds(proto, rule, ledger);
    CHECK(ledger.total_messages() <= 4);
  }
}

TEST_CASE("tracking driver: empty stream") {
  ForwardAll proto;
  BitRule rule{4, 2};
  CommLedger ledger(2);
  int records = 0;
  run_tracking({}, proto, {5, 10}, rule, ledger, [&](uint64_t) { ++records; });
  CHECK(records == 2);
  CHECK(proto.forwarded == 0);
  CHECK(ledger.total_bits() == 0);
}

TEST_CASE("tracking driver: single forwarded event") {
  ForwardAll proto;
  BitRule rule{4, 2};
  CommLedger ledger(2);
  run_tracking({StreamEvent{1, 0, 2}}, proto, {}, rule, ledger,
               [](uint64_t) {});
  CHECK(proto.forwarded == 1);
  CHECK(ledger.total_messages() == 1);
}

TEST_CASE("tracking driver rejects non-increasing times") {
  ForwardAll proto;
  BitRule rule{4, 2};
  CommLedger ledger(2);
  std::vector<StreamEvent> bad{{2, 0, 0}, {2, 1, 1}};
  CHECK_THROWS(run_tracking(bad, proto, {}, rule, ledger, [](uint64_t) {}));
}

TEST_CASE("tracking driver: query every step records m answers") {
  auto events = generate_stream(GeneratorSpec::parse("zipf(1.1)"), 2, 16, 100,
                                SeededRng(3));
  ForwardAll proto;
  BitRule rule{16, 2};
  CommLedger ledger(2);
  std::set<uint64_t> queries;
  for (uint64_t t = 1; t <= 100; ++t) queries.insert(t);
  int records = 0;
  run_tracking(events, proto, queries, rule, ledger,
               [&](uint64_t) { ++records; });
  CHECK(records == 100);
  CHECK(proto.forwarded == 100);
}

TEST_CASE("stream file round trip") {
  auto events = generate_stream(GeneratorSpec::parse("uniform"), 3, 8, 50,
                                SeededRng(9));
  std::stringstream ss;
  write_stream(ss, events);
  ss.seekg(0);
  auto back = read_stream(ss);
  REQUIRE(back.size() == events.size());
  for (size_t i = 0; i < events.size(); ++i) {
    CHECK(back[i].time == events[i].time);
    CHECK(back[i].site == events[i].site);
    CHECK(back[i].item == events[i].item);
  }
}

TEST_CASE("accumulate matches a manual recount") {
  auto events = generate_stream(GeneratorSpec::parse("uniform"), 3, 8, 200,
                                SeededRng(11));
  auto inp = accumulate(events, 3, 8, 120);
  FrequencyVector expect[3];
  for (auto& ev : events)
    if (ev.time <= 120) expect[ev.site].add(ev.item);
  for (uint32_t i = 0; i < 3; ++i) CHECK(inp.locals[i] == expect[i]);
}

TEST_CASE("information hiding: a site's traffic ignores other sites' data") {
  PartitionedInput a(2, 16), b(2, 16);
  SeededRng rng(21);
  for (int e = 0; e < 12; ++e) {
    Item j = static_cast<Item>(rng.next_below(16));
    Count c = rng.next_below(6) + 1;
    a.locals[0].add(j, c);
    b.locals[0].add(j, c);
  }
  a.locals[1].add(3, 9);
  b.locals[1].add(7, 2);  // only site 1 differs

  BitRule rule{16, 2};
  CommLedger la(2), lb(2);
  l2hh_static(a, 0.4, SeededRng(77), la, rule);
  l2hh_static(b, 0.4, SeededRng(77), lb, rule);
  CHECK(la.per_site_bits()[0] == lb.per_site_bits()[0]);
}

TEST_CASE("ledger completeness across a run") {
  auto inp = m1();
  BitRule rule{2, 2};
  CommLedger ledger(2);
  l2hh_static(inp, 0.5, SeededRng(13), ledger, rule);
  uint64_t sum = 0;
  for (uint64_t b : ledger.per_site_bits()) sum += b;
  CHECK(sum == ledger.total_bits());
}
