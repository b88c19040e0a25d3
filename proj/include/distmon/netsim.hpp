#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "distmon/freq_vector.hpp"
#include "distmon/ledger.hpp"

namespace distmon {

// Typed protocol message. Interpretation of type/payload is up to the
// protocol; the driver only meters it.
struct Message {
  uint8_t type = 0;
  uint32_t site = 0;
  Item item = 0;
  double payload = 0.0;
};

struct StreamEvent {
  uint64_t time = 0;  // 1..m, strictly increasing within a run
  uint32_t site = 0;
  Item item = 0;
};

struct ProtocolDivergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Round-synchronous coordinator-model protocol. Each round, every site emits
// an outbox (visible only to the coordinator); the coordinator replies with a
// broadcast or declares the protocol finished.
struct CoordinatorResult {
  std::vector<Message> broadcast;
  bool done = false;
};

class RoundProtocol {
 public:
  virtual ~RoundProtocol() = default;
  virtual std::vector<Message> site_step(
      uint32_t round, uint32_t site,
      const std::vector<Message>& broadcasts) = 0;
  virtual CoordinatorResult coordinator_step(
      uint32_t round, const std::vector<std::vector<Message>>& inboxes) = 0;
  virtual uint32_t round_limit() const { return 64; }
};

// Runs rounds until the coordinator declares completion. Every site message
// is charged once; every broadcast message is charged k times (once per
// recipient). Throws ProtocolDivergence past the round limit.
void run_rounds(RoundProtocol& proto, const BitRule& rule, CommLedger& ledger);

// Event-sequential tracking protocol. on_event must touch only the arriving
// site's state (plus coordinator state reachable through messages the
// protocol itself charges); the driver delivers events in order with zero
// latency.
class TrackingProtocol {
 public:
  virtual ~TrackingProtocol() = default;
  virtual void on_event(const StreamEvent& ev, CommLedger& ledger,
                        const BitRule& rule) = 0;
};

// Delivers events in time order; after all events with time <= q have been
// processed, calls record(q) for each query time q so the caller can snapshot
// the coordinator's answer.
void run_tracking(const std::vector<StreamEvent>& events,
                  TrackingProtocol& proto,
                  const std::set<uint64_t>& query_times, const BitRule& rule,
                  CommLedger& ledger,
                  const std::function<void(uint64_t)>& record);

// Stream file format: one "time site item" record per line.
void write_stream(std::ostream& os, const std::vector<StreamEvent>& events);
std::vector<StreamEvent> read_stream(std::istream& is);
void write_stream_file(const std::string& path,
                       const std::vector<StreamEvent>& events);
std::vector<StreamEvent> read_stream_file(const std::string& path);

// Folds an event prefix into per-site frequency vectors.
PartitionedInput accumulate(const std::vector<StreamEvent>& events, uint32_t k,
                            uint32_t n, uint64_t up_to_time = UINT64_MAX);

}  // namespace distmon
