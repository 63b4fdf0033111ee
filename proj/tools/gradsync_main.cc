/* Copyright 2026 The gradsync Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// gradsync command-line driver.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gradsync/allreduce.h"
#include "gradsync/experiment.h"
#include "gradsync/halfprec.h"
#include "gradsync/schedule.h"
#include "gradsync/tcp_transport.h"
#include "json.hpp"

namespace fs = std::filesystem;
namespace ex = gradsync::experiment;
namespace col = gradsync::collectives;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAbort = 3;
constexpr int kExitCheck = 4;

struct RunArgs {
  std::string config_file;
  std::string preset;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string runs_root = "runs";
  std::optional<std::uint64_t> seed;
  bool check = false;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("GRADSYNC_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ex::ConfigError({"GRADSYNC_SEED: not an unsigned integer"});
  return s;
}

int cmd_run(const RunArgs& a) {
  try {
    nlohmann::ordered_json file = nlohmann::ordered_json::object();
    if (!a.config_file.empty()) {
      std::ifstream in(a.config_file);
      if (!in) throw ex::ConfigError({"cannot read config file " + a.config_file});
      file = nlohmann::ordered_json::parse(in, nullptr, false);
      if (file.is_discarded()) throw ex::ConfigError({a.config_file + ": malformed JSON"});
    }
    std::string preset = a.preset;
    if (preset.empty() && file.is_object() && file.contains("preset") &&
        file["preset"].is_string()) {
      preset = file["preset"].get<std::string>();
    }
    ex::ExperimentConfig cfg = ex::preset_config(preset.empty() ? "default" : preset);
    cfg = ex::config_from_json(file, cfg);
    if (!a.preset.empty()) cfg.preset = a.preset;
    cfg = ex::apply_overrides(cfg, a.overrides);

    bool seed_given = file.contains("seed");
    for (const auto& o : a.overrides) seed_given = seed_given || o.rfind("seed=", 0) == 0;
    if (a.seed) {
      cfg.seed = *a.seed;
    } else if (!seed_given) {
      if (auto s = env_seed()) cfg.seed = *s;
    }
    ex::validate(cfg);

    const fs::path dir =
        a.out_dir.empty() ? ex::default_run_dir(a.runs_root, cfg) : fs::path(a.out_dir);
    const ex::RunArtifacts art = ex::run_experiment(cfg, dir);
    std::cout << "run directory: " << dir.string() << "\n" << art.report.dump(2) << "\n";
    if (art.aborted) {
      std::cerr << "run aborted; metrics up to the failure are in " << dir.string() << "\n";
      return kExitAbort;
    }
    if (a.check && art.report.contains("headline_pass") && !art.report["headline_pass"].get<bool>()) {
      std::cerr << "headline check failed\n";
      return kExitCheck;
    }
    return kExitOk;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return kExitConfig;
  }
}

int cmd_compare(const std::string& a, const std::string& b,
                const std::vector<std::string>& tols) {
  std::map<std::string, double> tolerances;
  for (const auto& t : tols) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      std::cerr << "tolerance '" << t << "' is not metric=value\n";
      return kExitConfig;
    }
    try {
      tolerances[t.substr(0, eq)] = std::stod(t.substr(eq + 1));
    } catch (const std::exception&) {
      std::cerr << "tolerance '" << t << "' has a non-numeric value\n";
      return kExitConfig;
    }
  }
  try {
    const ex::CompareReport r = ex::compare_runs(a, b, tolerances);
    std::cout << ex::to_json(r).dump(2) << "\n";
    return r.pass ? kExitOk : kExitCheck;
  } catch (const ex::CompareError& e) {
    std::cerr << "compare error: " << e.what() << "\n";
    return kExitConfig;
  }
}

struct CoordArgs {
  std::uint16_t port = 0;
  int workers = 2;
  int group_size = 1;
  std::size_t elements = 1024;
  std::string algorithm = "ring";
  std::size_t eta = 0;
  std::uint64_t seed = 1;
  int timeout_ms = 30000;
};

int cmd_coord(CoordArgs a, bool seed_given) {
  if (!seed_given) {
    if (auto s = env_seed()) a.seed = *s;
  }
  col::ReduceSchedule schedule;
  try {
    const col::Topology topo(a.workers, a.group_size);
    if (a.algorithm == "hybrid") {
      schedule = col::make_hybrid_schedule(topo, a.elements, 4, a.eta);
    } else {
      schedule = col::make_schedule(col::algorithm_from_string(a.algorithm), topo, a.elements, 4);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  std::mt19937_64 rng(a.seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<std::vector<float>> inputs(static_cast<std::size_t>(a.workers));
  for (auto& in : inputs) {
    in.resize(a.elements);
    for (float& v : in) v = dist(rng);
  }

  gradsync::tcp::ClusterOptions opts;
  opts.io_timeout = gradsync::tcp::Millis(a.timeout_ms);
  opts.accept_timeout = gradsync::tcp::Millis(a.timeout_ms);
  gradsync::tcp::Coordinator coord(a.port, a.workers, opts);
  std::cerr << "listening on 127.0.0.1:" << coord.port() << "\n";
  try {
    coord.accept_workers();
    std::vector<std::vector<std::uint8_t>> raw;
    for (const auto& in : inputs) raw.push_back(gradsync::fusion::floats_as_payload(in));
    const auto out = coord.run(schedule, raw, gradsync::tcp::DType::kF32, col::ReduceOp::kSum);
    coord.shutdown();
    const auto expected = col::execute_in_memory(schedule, inputs, col::ReduceOp::kSum);
    bool equal = true;
    for (std::size_t r = 0; r < out.size(); ++r) {
      equal = equal && gradsync::fusion::payload_as_floats(out[r]) == expected[r];
    }
    nlohmann::ordered_json j;
    j["algorithm"] = std::string(col::to_string(schedule.algorithm));
    j["workers"] = a.workers;
    j["group_size"] = a.group_size;
    j["elements"] = a.elements;
    j["total_steps"] = schedule.total_steps();
    j["matches_in_memory"] = equal;
    std::cout << j.dump(2) << "\n";
    return equal ? kExitOk : kExitCheck;
  } catch (const gradsync::tcp::CollectiveAborted& e) {
    std::cerr << e.what() << "\n";
    return kExitAbort;
  } catch (const gradsync::tcp::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitAbort;
  }
}

int cmd_worker(const std::string& host, std::uint16_t port, int rank, int timeout_ms) {
  try {
    return gradsync::tcp::run_worker(host, port, rank,
                                     gradsync::tcp::WorkerOptions{gradsync::tcp::Millis(timeout_ms)});
  } catch (const gradsync::tcp::TransportError& e) {
    std::cerr << "worker error: " << e.what() << "\n";
    return kExitAbort;
  }
}

int cmd_inspect(const std::vector<std::string>& values) {
  int status = kExitOk;
  for (const auto& v : values) {
    try {
      const auto h = gradsync::halfprec::parse_half(v);
      const auto f = gradsync::halfprec::decompose(h);
      char bits[8];
      std::snprintf(bits, sizeof(bits), "0x%04x", h.bits);
      nlohmann::ordered_json j;
      j["input"] = v;
      j["bits"] = bits;
      j["sign"] = f.sign;
      j["exponent"] = f.exponent;
      j["mantissa"] = f.mantissa;
      j["category"] = f.category;
      if (f.category == "nan") {
        j["value"] = "nan";
      } else if (f.category == "inf") {
        j["value"] = f.sign ? "-inf" : "inf";
      } else {
        j["value"] = f.value;
      }
      std::cout << j.dump() << "\n";
    } catch (const std::invalid_argument& e) {
      std::cerr << "cannot parse '" << v << "': " << e.what() << "\n";
      status = kExitConfig;
    }
  }
  return status;
}

int cmd_sweep(const ex::SweepConfig& cfg, const std::string& out_dir) {
  ex::SweepResult r;
  try {
    r = ex::run_sweep(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (out_dir.empty()) {
    std::cout << r.grid_csv << "\n" << r.crossover_csv;
  } else {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "grid.csv") << r.grid_csv;
    std::ofstream(fs::path(out_dir) / "crossover.csv") << r.crossover_csv;
  }
  for (const auto& [k, bytes] : r.crossover_bytes) {
    std::cerr << "k=" << k << ": ring catches up with hierarchical at " << bytes << " bytes\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradsync: all-reduce schedules, tensor fusion and mixed-precision LARS"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  RunArgs run_args;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "Run an experiment config or preset");
  run->add_option("-c,--config", run_args.config_file, "JSON config file");
  run->add_option("-p,--preset", run_args.preset, "Preset name")
      ->check(CLI::IsMember(ex::preset_names()));
  run->add_option("-s,--set", run_args.overrides, "Override a config field (key=value)")
      ->allow_extra_args(false);
  run->add_option("-o,--out", run_args.out_dir, "Run directory (default: <runs-root>/<time>-<hash>)");
  run->add_option("--runs-root", run_args.runs_root, "Parent of generated run directories");
  auto* run_seed_opt = run->add_option("--seed", run_seed, "Seed (falls back to GRADSYNC_SEED)");
  run->add_flag("--check", run_args.check, "Exit 4 when the preset's headline check fails");
  run->callback([&] {
    if (*run_seed_opt) run_args.seed = run_seed;
    exit_code = cmd_run(run_args);
  });

  std::string cmp_a, cmp_b;
  std::vector<std::string> cmp_tols;
  auto* compare = app.add_subcommand("compare", "Diff two runs' metrics");
  compare->add_option("a", cmp_a, "Run directory or metrics.csv")->required();
  compare->add_option("b", cmp_b, "Run directory or metrics.csv")->required();
  compare->add_option("-t,--tol", cmp_tols, "Per-metric tolerance (metric=value)");
  compare->callback([&] { exit_code = cmd_compare(cmp_a, cmp_b, cmp_tols); });

  CoordArgs coord_args;
  auto* coord = app.add_subcommand("coord", "Coordinate one TCP all-reduce across external workers");
  coord->add_option("--port", coord_args.port, "Listen port (0: ephemeral, printed on stderr)");
  coord->add_option("-w,--workers", coord_args.workers, "Number of workers")->check(CLI::PositiveNumber);
  coord->add_option("-k,--group-size", coord_args.group_size, "Group size")->check(CLI::PositiveNumber);
  coord->add_option("-n,--elements", coord_args.elements, "FP32 elements per worker");
  coord->add_option("-a,--algorithm", coord_args.algorithm, "ring, hierarchical or hybrid")
      ->check(CLI::IsMember({"ring", "hierarchical", "hybrid"}));
  coord->add_option("--eta", coord_args.eta, "Hybrid threshold in bytes");
  auto* coord_seed = coord->add_option("--seed", coord_args.seed, "Input seed (falls back to GRADSYNC_SEED)");
  coord->add_option("--timeout-ms", coord_args.timeout_ms, "Accept and I/O timeout");
  coord->callback([&] { exit_code = cmd_coord(coord_args, static_cast<bool>(*coord_seed)); });

  std::string worker_host = "127.0.0.1";
  std::uint16_t worker_port = 0;
  int worker_rank = -1;
  int worker_timeout = 30000;
  auto* worker = app.add_subcommand("worker", "Serve collectives for a coordinator");
  worker->add_option("--host", worker_host, "Coordinator host");
  worker->add_option("--port", worker_port, "Coordinator port")->required();
  worker->add_option("--rank", worker_rank, "Rank to claim (-1: let the coordinator assign)");
  worker->add_option("--timeout-ms", worker_timeout, "I/O timeout");
  worker->callback(
      [&] { exit_code = cmd_worker(worker_host, worker_port, worker_rank, worker_timeout); });

  std::vector<std::string> inspect_values;
  auto* half = app.add_subcommand("halfprec", "Binary16 utilities");
  half->require_subcommand(1);
  auto* inspect = half->add_subcommand("inspect", "Decode binary16 patterns or narrow decimals");
  inspect->add_option("values", inspect_values, "0x-prefixed bit patterns or decimal numbers")
      ->required();
  inspect->callback([&] { exit_code = cmd_inspect(inspect_values); });

  ex::SweepConfig sweep_cfg;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "eta/theta/k grid and ring-vs-hierarchical crossover");
  sweep->add_option("-w,--workers", sweep_cfg.workers, "Number of workers");
  sweep->add_option("-k,--group-sizes", sweep_cfg.group_sizes, "Group sizes");
  sweep->add_option("--thetas", sweep_cfg.thetas, "Fusion thresholds in bytes");
  sweep->add_option("--etas", sweep_cfg.etas, "Hybrid thresholds in bytes");
  sweep->add_option("--tensors", sweep_cfg.tensor_bytes, "Gradient tensor sizes in bytes, backward order");
  sweep->add_option("--alpha", sweep_cfg.link_alpha, "Per-message latency in seconds");
  sweep->add_option("--bandwidth", sweep_cfg.link_bandwidth, "Link bandwidth in bytes/s");
  sweep->add_option("-o,--out", sweep_out, "Write grid.csv and crossover.csv here");
  sweep->callback([&] { exit_code = cmd_sweep(sweep_cfg, sweep_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error:\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return kExitConfig;
  }
  return exit_code;
}
