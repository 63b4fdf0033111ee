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

#ifndef GRADSYNC_EXPERIMENT_H_
#define GRADSYNC_EXPERIMENT_H_

// Experiment runner: synthetic data, a data-parallel ToyNet, fused hybrid
// all-reduce over the simulated or loopback TCP transport, LARS updates and
// modeled communication time.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace gradsync::experiment {

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string preset = "default";

  // Cluster and communication.
  std::int64_t workers = 4;
  std::int64_t group_size = 2;
  std::int64_t fusion_theta_bytes = 4096;
  std::int64_t hybrid_eta_bytes = 8192;
  std::string transport = "sim";  // sim | tcp
  bool fp16_allreduce = false;
  double link_alpha = 5e-6;        // seconds per message
  double link_bandwidth = 1.25e9;  // bytes per second
  double intra_alpha = 0.0;        // intra-group link; bandwidth 0 = same as inter
  double intra_bandwidth = 0.0;
  // Test hook for the tcp transport: this rank dies during the first
  // all-reduce of training step tcp_fault_step. -1 disables it.
  std::int64_t tcp_fault_rank = -1;
  std::int64_t tcp_fault_step = 0;

  // Optimizer.
  std::string precision = "fp32";  // fp32 | mixed
  bool lars = true;
  double lars_eta = 0.001;
  double weight_decay = 1e-4;
  bool exempt_bias = true;
  bool exempt_bn = true;
  double momentum = 0.9;
  double base_lr = 2.0;
  std::int64_t warmup_steps = 5;
  double poly_power = 2.0;
  double end_lr = 0.0;
  std::string loss_scale = "dynamic";  // dynamic | fixed
  double loss_scale_initial = 1024.0;

  // Data and model.
  std::uint64_t seed = 1;
  std::int64_t steps = 40;
  std::int64_t batch_per_worker = 32;
  std::int64_t classes = 4;
  std::int64_t input_dim = 16;
  double data_spread = 1.0;
  std::vector<std::int64_t> hidden = {32, 32};
  bool hidden_bn = true;
  bool pre_classifier_bn = false;
};

// Every violated constraint, one message each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Aborted by a transport failure. Metrics up to the failure were written.
class RunAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> preset_names();
// Throws ConfigError for an unknown name.
ExperimentConfig preset_config(const std::string& name);

Json to_json(const ExperimentConfig& cfg);
// Reads fields over `base`. Unknown keys and wrong types are violations.
ExperimentConfig config_from_json(const Json& j, const ExperimentConfig& base = {});
// Applies "key=value" overrides. The value is parsed as JSON when possible,
// as a bare string otherwise.
ExperimentConfig apply_overrides(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& overrides);

// Empty when valid.
std::vector<std::string> validation_errors(const ExperimentConfig& cfg);
void validate(const ExperimentConfig& cfg);  // throws ConfigError

// FNV-1a over the canonical JSON text.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t h);
// "<YYYYmmdd-HHMMSS>-<hash>" under `root`.
std::filesystem::path default_run_dir(const std::filesystem::path& root,
                                      const ExperimentConfig& cfg);

struct MetricsRow {
  std::uint64_t step = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double lr = 0.0;
  double loss_scale = 1.0;
  bool skipped = false;
  std::uint64_t fusion_batches = 0;
  std::uint64_t ring_calls = 0;
  std::uint64_t hierarchical_calls = 0;
  std::uint64_t allreduce_steps = 0;
  std::uint64_t bytes_on_wire = 0;
  double comm_time_s = 0.0;
};

std::vector<std::string> metrics_header();
std::string to_csv_line(const MetricsRow& row);

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::vector<std::string> fusion_trace;      // JSON lines
  std::vector<std::string> activation_trace;  // JSON lines
  double final_train_accuracy = 0.0;
  double final_loss = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

// One training run as described by `cfg` (validated first). Deterministic
// for a given config on the sim transport.
TrainResult train(const ExperimentConfig& cfg);

struct RunArtifacts {
  std::filesystem::path dir;
  Json report;
  bool aborted = false;
};

// Runs the config (or the pair of runs an ablation preset calls for) and
// writes metrics.csv, fusion.jsonl, activations.jsonl and report.json into
// `dir`. Ablation variants go into subdirectories.
RunArtifacts run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir);

// Closed-form and generated step counts for p and k, as CSV text.
std::string stepcount_table(std::int64_t p, std::int64_t k);

class CompareError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricDelta {
  std::string metric;
  double max_abs_delta = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct CompareReport {
  std::vector<MetricDelta> metrics;
  bool pass = true;
};

// Compares two metrics.csv files (or run directories holding one). Columns
// without an entry in `tolerances` must match exactly. Throws CompareError
// on differing headers or row counts.
CompareReport compare_runs(const std::filesystem::path& a, const std::filesystem::path& b,
                           const std::map<std::string, double>& tolerances = {});
Json to_json(const CompareReport& report);

// Grid over group sizes, fusion thresholds and hybrid thresholds for a fixed
// list of gradient tensor sizes (backward order).
struct SweepConfig {
  std::int64_t workers = 1024;
  std::vector<std::int64_t> group_sizes = {4, 16, 32};
  std::vector<std::int64_t> thetas = {0, 1 << 20, 8 << 20};
  std::vector<std::int64_t> etas = {0, 1 << 16, 1 << 20, 1 << 30};
  std::vector<std::int64_t> tensor_bytes;  // empty: a built-in AlexNet-like list
  double link_alpha = 5e-6;
  double link_bandwidth = 1.25e9;
};

struct SweepResult {
  std::string grid_csv;  // k,theta_bytes,eta_bytes,batches,ring_calls,hierarchical_calls,steps,modeled_time_s
  std::string crossover_csv;  // k,bytes,ring_time_s,hierarchical_time_s,faster
  std::map<std::int64_t, std::int64_t> crossover_bytes;  // k -> bytes, when found
};

SweepResult run_sweep(const SweepConfig& cfg);

}  // namespace gradsync::experiment

#endif  // GRADSYNC_EXPERIMENT_H_
