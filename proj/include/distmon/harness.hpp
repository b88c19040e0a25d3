#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "distmon/freq_vector.hpp"
#include "distmon/ledger.hpp"
#include "distmon/netsim.hpp"
#include "distmon/rng.hpp"

namespace distmon {

enum class GeneratorKind { zipf, uniform, planted_hh, equal_split };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::zipf;
  double zipf_s = 1.1;
  uint32_t planted_count = 1;
  double planted_share = 0.5;

  // Accepts "zipf(1.1)", "zipf", "uniform", "planted_hh(3,0.2)",
  // "equal_split". Throws std::invalid_argument otherwise.
  static GeneratorSpec parse(const std::string& text);
  std::string to_string() const;
};

// Deterministic stream of m arrivals over items [0, n) and sites [0, k).
// zipf: item rank^{-s} weighted, site uniform. uniform: both uniform.
// planted_hh: `count` planted items take floor(share * m) arrivals each, the
// rest uniform over the remaining items; arrival order shuffled. equal_split:
// equal global frequencies, each item's arrivals dealt round-robin over
// sites, items interleaved (no randomness used).
std::vector<StreamEvent> generate_stream(const GeneratorSpec& spec, uint32_t k,
                                         uint32_t n, uint64_t m, SeededRng rng);

// Items whose v_j^p is at least alpha * Fp.
std::vector<Item> heavy_set(const FrequencyVector& v, int p, double alpha);

// Distributed count sketch baseline: every site pushes its width x depth
// counter table (width = 2/eps^2, depth = 5), the coordinator sums tables and
// answers with the median row estimate.
class CountSketch {
 public:
  CountSketch(const PartitionedInput& inp, double eps, SeededRng rng,
              CommLedger& ledger, const BitRule& rule);
  double estimate(Item j) const;
  uint32_t width() const { return width_; }
  static constexpr uint32_t kDepth = 5;

 private:
  uint32_t bucket(uint32_t row, Item j) const;
  double sign(uint32_t row, Item j) const;
  uint32_t width_;
  uint64_t salt_;
  std::vector<std::vector<double>> table_;
};

// Least-squares slope of log(y) against log(x).
double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys);

struct ExperimentConfig {
  std::string protocol;  // l2hh, lphh2, lphh1, countsketch, fpstatic1,
                         // fpstatic2, l2track, lptrack, fptrack
  uint32_t k = 4;
  uint32_t n = 256;
  int p = 2;
  double eps = 0.3;
  uint64_t m = 10000;
  GeneratorSpec generator;
  uint32_t trials = 10;
  uint64_t seed = 1;
  uint32_t checkpoints = 1;

  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
};

struct ExperimentResult {
  std::string csv;           // per-trial rows, fixed columns
  nlohmann::json aggregate;  // config echo + summary statistics
  double coverage_rate = 0.0;
  double mean_bits = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace distmon
