#include "distmon/netsim.hpp"

#include <fstream>
#include <sstream>

namespace distmon {

void run_rounds(RoundProtocol& proto, const BitRule& rule, CommLedger& ledger) {
  const uint64_t bits = rule.bits_per_message();
  std::vector<Message> broadcasts;
  for (uint32_t round = 0;; ++round) {
    if (round >= proto.round_limit())
      throw ProtocolDivergence("run_rounds: round limit exceeded");
    ledger.set_round(round);
    std::vector<std::vector<Message>> inboxes(rule.k);
    for (uint32_t i = 0; i < rule.k; ++i) {
      inboxes[i] = proto.site_step(round, i, broadcasts);
      ledger.charge_many(i, inboxes[i].size(), bits);
    }
    CoordinatorResult res = proto.coordinator_step(round, inboxes);
    if (res.done) return;
    for (const Message& msg : res.broadcast) {
      (void)msg;
      ledger.charge_broadcast(bits);
    }
    broadcasts = std::move(res.broadcast);
  }
}

void run_tracking(const std::vector<StreamEvent>& events,
                  TrackingProtocol& proto,
                  const std::set<uint64_t>& query_times, const BitRule& rule,
                  CommLedger& ledger,
                  const std::function<void(uint64_t)>& record) {
  auto q = query_times.begin();
  uint64_t last_time = 0;
  for (const StreamEvent& ev : events) {
    if (ev.time <= last_time)
      throw std::invalid_argument("run_tracking: events must be sorted");
    while (q != query_times.end() && *q < ev.time) {
      if (record) record(*q);
      ++q;
    }
    proto.on_event(ev, ledger, rule);
    last_time = ev.time;
  }
  while (q != query_times.end()) {
    if (record) record(*q);
    ++q;
  }
}

void write_stream(std::ostream& os, const std::vector<StreamEvent>& events) {
  for (const StreamEvent& ev : events)
    os << ev.time << ' ' << ev.site << ' ' << ev.item << '\n';
}

std::vector<StreamEvent> read_stream(std::istream& is) {
  std::vector<StreamEvent> events;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    StreamEvent ev;
    if (!(ls >> ev.time >> ev.site >> ev.item))
      throw std::runtime_error("read_stream: malformed record: " + line);
    events.push_back(ev);
  }
  return events;
}

void write_stream_file(const std::string& path,
                       const std::vector<StreamEvent>& events) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_stream_file: cannot open " + path);
  write_stream(os, events);
}

std::vector<StreamEvent> read_stream_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_stream_file: cannot open " + path);
  return read_stream(is);
}

PartitionedInput accumulate(const std::vector<StreamEvent>& events, uint32_t k,
                            uint32_t n, uint64_t up_to_time) {
  PartitionedInput inp(k, n);
  for (const StreamEvent& ev : events) {
    if (ev.time > up_to_time) break;
    if (ev.site >= k || ev.item >= n)
      throw std::out_of_range("accumulate: event outside (k, n)");
    inp.locals[ev.site].add(ev.item);
  }
  return inp;
}

}  // namespace distmon
