#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "distmon/harness.hpp"
#include "distmon/netsim.hpp"

using namespace distmon;

namespace {

std::string output_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("DISTMON_OUT"); env && *env) return env;
  return flag_value;
}

int cmd_gen(const std::string& generator, uint32_t k, uint32_t n, uint64_t m,
            uint64_t seed, const std::string& out) {
  auto spec = GeneratorSpec::parse(generator);
  auto events = generate_stream(spec, k, n, m, SeededRng(seed, 0).derive(0));
  if (out.empty() || out == "-") {
    write_stream(std::cout, events);
  } else {
    write_stream_file(out, events);
    std::cout << "wrote " << events.size() << " events to " << out << "\n";
  }
  return 0;
}

int cmd_run(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentResult res = run_experiment(cfg);
  const std::string dir = output_dir(out_dir);
  std::filesystem::create_directories(dir);
  const std::string stem = dir + "/" + cfg.protocol + "_" +
                           std::to_string(cfg.seed);
  {
    std::ofstream csv(stem + ".csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + stem + ".csv");
    csv << res.csv;
  }
  {
    std::ofstream js(stem + ".json", std::ios::binary);
    if (!js) throw std::runtime_error("cannot write " + stem + ".json");
    js << res.aggregate.dump(2) << "\n";
  }
  std::cout << res.aggregate.dump(2) << "\n";
  return 0;
}

int cmd_report(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot read " + in_path);
  std::string line;
  uint64_t rows = 0, ok = 0;
  double bits = 0.0, est = 0.0, est_sq = 0.0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;  // column header row
      continue;
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10)
      throw std::runtime_error("malformed csv row: " + line);
    est += std::stod(fields[3]);
    est_sq += std::stod(fields[3]) * std::stod(fields[3]);
    ok += fields[6] == "1" ? 1 : 0;
    bits += std::stod(fields[7]);
    ++rows;
  }
  const double nr = rows ? static_cast<double>(rows) : 1.0;
  nlohmann::json agg{{"rows", rows},
                     {"coverage_rate", static_cast<double>(ok) / nr},
                     {"mean_bits", bits / nr},
                     {"mean_estimate", est / nr},
                     {"var_estimate", est_sq / nr - (est / nr) * (est / nr)}};
  std::cout << agg.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"communication-metered distributed heavy-hitter / frequency-"
               "moment simulator"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string generator = "zipf(1.1)";
  std::string out = ".";
  std::string stream_out;
  std::string report_in;

  auto* gen = app.add_subcommand("gen", "generate a stream file");
  gen->add_option("--k", cfg.k, "number of sites");
  gen->add_option("--n", cfg.n, "universe size");
  gen->add_option("--m", cfg.m, "stream length");
  gen->add_option("--seed", cfg.seed, "rng seed");
  gen->add_option("--generator", generator,
                  "zipf(s) | uniform | planted_hh(count,share) | equal_split");
  gen->add_option("--out", stream_out, "stream file path ('-' for stdout)");

  auto* run = app.add_subcommand("run", "run an experiment grid cell");
  run->add_option("--protocol", cfg.protocol,
                  "l2hh | lphh2 | lphh1 | countsketch | fpstatic1 | fpstatic2 "
                  "| l2track | lptrack | fptrack")
      ->required();
  run->add_option("--k", cfg.k, "number of sites");
  run->add_option("--n", cfg.n, "universe size");
  run->add_option("--p", cfg.p, "moment order");
  run->add_option("--eps", cfg.eps, "accuracy parameter");
  run->add_option("--m", cfg.m, "stream length");
  run->add_option("--trials", cfg.trials, "independent trials");
  run->add_option("--seed", cfg.seed, "rng seed");
  run->add_option("--generator", generator, "input generator");
  run->add_option("--checkpoints", cfg.checkpoints,
                  "query checkpoints (tracking protocols)");
  run->add_option("--out", out,
                  "output directory (env DISTMON_OUT overrides)");

  auto* report = app.add_subcommand("report", "recompute aggregates from csv");
  report->add_option("--in", report_in, "csv file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen(generator, cfg.k, cfg.n, cfg.m, cfg.seed, stream_out);
    if (run->parsed()) {
      cfg.generator = GeneratorSpec::parse(generator);
      return cmd_run(cfg, out);
    }
    return cmd_report(report_in);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
