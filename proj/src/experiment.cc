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

#include "gradsync/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "gradsync/allreduce.h"
#include "gradsync/fusion.h"
#include "gradsync/halfprec.h"
#include "gradsync/lars.h"
#include "gradsync/loss_scale.h"
#include "gradsync/netsim.h"
#include "gradsync/schedule.h"
#include "gradsync/tcp_transport.h"
#include "gradsync/toymodel.h"

namespace gradsync::experiment {

namespace fs = std::filesystem;

#define GRADSYNC_CONFIG_FIELDS(X) \
  X(preset)                       \
  X(workers)                      \
  X(group_size)                   \
  X(fusion_theta_bytes)           \
  X(hybrid_eta_bytes)             \
  X(transport)                    \
  X(fp16_allreduce)               \
  X(link_alpha)                   \
  X(link_bandwidth)               \
  X(intra_alpha)                  \
  X(intra_bandwidth)              \
  X(tcp_fault_rank)               \
  X(tcp_fault_step)               \
  X(precision)                    \
  X(lars)                         \
  X(lars_eta)                     \
  X(weight_decay)                 \
  X(exempt_bias)                  \
  X(exempt_bn)                    \
  X(momentum)                     \
  X(base_lr)                      \
  X(warmup_steps)                 \
  X(poly_power)                   \
  X(end_lr)                       \
  X(loss_scale)                   \
  X(loss_scale_initial)           \
  X(seed)                         \
  X(steps)                        \
  X(batch_per_worker)             \
  X(classes)                      \
  X(input_dim)                    \
  X(data_spread)                  \
  X(hidden)                       \
  X(hidden_bn)                    \
  X(pre_classifier_bn)

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

void read_field(const Json& v, const char* key, std::string& out, std::vector<std::string>& errs) {
  if (!v.is_string()) {
    errs.push_back(std::string(key) + ": expected a string");
    return;
  }
  out = v.get<std::string>();
}

void read_field(const Json& v, const char* key, bool& out, std::vector<std::string>& errs) {
  if (!v.is_boolean()) {
    errs.push_back(std::string(key) + ": expected true or false");
    return;
  }
  out = v.get<bool>();
}

void read_field(const Json& v, const char* key, std::int64_t& out,
                std::vector<std::string>& errs) {
  if (!v.is_number_integer()) {
    errs.push_back(std::string(key) + ": expected an integer");
    return;
  }
  out = v.get<std::int64_t>();
}

void read_field(const Json& v, const char* key, std::uint64_t& out,
                std::vector<std::string>& errs) {
  if (!v.is_number_unsigned()) {
    errs.push_back(std::string(key) + ": expected a non-negative integer");
    return;
  }
  out = v.get<std::uint64_t>();
}

void read_field(const Json& v, const char* key, double& out, std::vector<std::string>& errs) {
  if (!v.is_number()) {
    errs.push_back(std::string(key) + ": expected a number");
    return;
  }
  out = v.get<double>();
}

void read_field(const Json& v, const char* key, std::vector<std::int64_t>& out,
                std::vector<std::string>& errs) {
  if (!v.is_array() || !std::all_of(v.begin(), v.end(),
                                    [](const Json& e) { return e.is_number_integer(); })) {
    errs.push_back(std::string(key) + ": expected an array of integers");
    return;
  }
  out = v.get<std::vector<std::int64_t>>();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(path, text);
}

bool is_known_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error("invalid config: " + join(violations, "; ")),
      violations_(std::move(violations)) {}

std::vector<std::string> preset_names() {
  return {"default", "mixed", "lars-ablation", "decay-ablation", "stepcount-vs-paper"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.preset = name;
  if (name == "default") return cfg;
  if (name == "mixed") {
    cfg.precision = "mixed";
    cfg.fp16_allreduce = true;
    return cfg;
  }
  if (name == "lars-ablation" || name == "decay-ablation") {
    // Full batch on every worker and a learning rate far past what plain
    // momentum SGD tolerates.
    // Overlapping blobs so that neither variant trivially fits the data.
    cfg.workers = 4;
    cfg.group_size = 2;
    cfg.batch_per_worker = 128;
    cfg.classes = 10;
    cfg.data_spread = 6.0;
    cfg.steps = 60;
    cfg.base_lr = 8.0;
    cfg.warmup_steps = 5;
    cfg.weight_decay = name == "lars-ablation" ? lars::kLargeBatchWeightDecay : 0.005;
    return cfg;
  }
  if (name == "stepcount-vs-paper") {
    cfg.workers = 1024;
    cfg.group_size = 16;
    return cfg;
  }
  throw ConfigError({"unknown preset '" + name + "' (known: " + join(preset_names(), ", ") +
                     ")"});
}

Json to_json(const ExperimentConfig& cfg) {
  Json j;
#define X(name) j[#name] = cfg.name;
  GRADSYNC_CONFIG_FIELDS(X)
#undef X
  return j;
}

ExperimentConfig config_from_json(const Json& j, const ExperimentConfig& base) {
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  ExperimentConfig cfg = base;
  std::vector<std::string> errs;
  std::set<std::string> known;
#define X(name)                                                    \
  known.insert(#name);                                             \
  if (j.contains(#name)) read_field(j.at(#name), #name, cfg.name, errs);
  GRADSYNC_CONFIG_FIELDS(X)
#undef X
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) errs.push_back(key + ": unknown field");
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return cfg;
}

ExperimentConfig apply_overrides(const ExperimentConfig& cfg,
                                 const std::vector<std::string>& overrides) {
  Json patch = Json::object();
  std::vector<std::string> errs;
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      errs.push_back("override '" + o + "' is not key=value");
      continue;
    }
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    patch[key] = std::move(value);
  }
  if (!errs.empty()) throw ConfigError(std::move(errs));
  return config_from_json(patch, cfg);
}

std::vector<std::string> validation_errors(const ExperimentConfig& c) {
  std::vector<std::string> e;
  if (!is_known_preset(c.preset)) e.push_back("preset: unknown preset '" + c.preset + "'");
  if (c.workers < 1) e.push_back("workers: must be >= 1");
  if (c.group_size < 1) e.push_back("group_size: must be >= 1");
  if (c.workers >= 1 && c.group_size >= 1 && c.workers % c.group_size != 0) {
    e.push_back("group_size: " + std::to_string(c.group_size) + " does not divide workers " +
                std::to_string(c.workers));
  }
  if (c.fusion_theta_bytes < 0) e.push_back("fusion_theta_bytes: must be >= 0");
  if (c.hybrid_eta_bytes < 0) e.push_back("hybrid_eta_bytes: must be >= 0");
  if (c.transport != "sim" && c.transport != "tcp") {
    e.push_back("transport: must be 'sim' or 'tcp'");
  }
  if (c.transport == "tcp" && c.workers > 64) {
    e.push_back("workers: the tcp transport forks one process per worker, at most 64");
  }
  if (!(c.link_alpha >= 0.0)) e.push_back("link_alpha: must be >= 0");
  if (!(c.link_bandwidth > 0.0)) e.push_back("link_bandwidth: must be > 0");
  if (!(c.intra_alpha >= 0.0)) e.push_back("intra_alpha: must be >= 0");
  if (!(c.intra_bandwidth >= 0.0)) e.push_back("intra_bandwidth: must be >= 0");
  if (c.tcp_fault_rank >= c.workers) e.push_back("tcp_fault_rank: no such worker");
  if (c.tcp_fault_step < 0) e.push_back("tcp_fault_step: must be >= 0");
  if (c.precision != "fp32" && c.precision != "mixed") {
    e.push_back("precision: must be 'fp32' or 'mixed'");
  }
  if (!(c.lars_eta > 0.0)) e.push_back("lars_eta: must be > 0");
  if (!(c.weight_decay >= 0.0)) e.push_back("weight_decay: must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) e.push_back("momentum: must be in [0, 1)");
  if (!(c.base_lr >= 0.0)) e.push_back("base_lr: must be >= 0");
  if (!(c.end_lr >= 0.0)) e.push_back("end_lr: must be >= 0");
  if (!(c.poly_power > 0.0)) e.push_back("poly_power: must be > 0");
  if (c.warmup_steps < 0) e.push_back("warmup_steps: must be >= 0");
  if (c.warmup_steps > c.steps) e.push_back("warmup_steps: exceeds steps");
  if (c.loss_scale != "dynamic" && c.loss_scale != "fixed") {
    e.push_back("loss_scale: must be 'dynamic' or 'fixed'");
  }
  if (!(c.loss_scale_initial > 0.0) || !std::isfinite(c.loss_scale_initial)) {
    e.push_back("loss_scale_initial: must be a positive finite number");
  }
  if (c.steps < 1) e.push_back("steps: must be >= 1");
  if (c.batch_per_worker < 1) e.push_back("batch_per_worker: must be >= 1");
  const bool has_bn = (c.hidden_bn && !c.hidden.empty()) || c.pre_classifier_bn;
  if (has_bn && c.batch_per_worker < 2) {
    e.push_back("batch_per_worker: batch norm needs at least 2 examples per worker");
  }
  if (c.classes < 2) e.push_back("classes: must be >= 2");
  if (c.input_dim < 1) e.push_back("input_dim: must be >= 1");
  if (!(c.data_spread > 0.0)) e.push_back("data_spread: must be > 0");
  for (std::int64_t h : c.hidden) {
    if (h < 1) {
      e.push_back("hidden: widths must be >= 1");
      break;
    }
  }
  return e;
}

void validate(const ExperimentConfig& cfg) {
  auto errs = validation_errors(cfg);
  if (!errs.empty()) throw ConfigError(std::move(errs));
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path default_run_dir(const fs::path& root, const ExperimentConfig& cfg) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  return root / (std::string(stamp) + "-" + hash_hex(config_hash(cfg)));
}

std::vector<std::string> metrics_header() {
  return {"step",       "loss",           "train_accuracy",  "lr",
          "loss_scale", "skipped",        "fusion_batches",  "ring_calls",
          "hierarchical_calls", "allreduce_steps", "bytes_on_wire", "comm_time_s"};
}

std::string to_csv_line(const MetricsRow& r) {
  std::ostringstream o;
  o << r.step << ',' << fmt(r.loss) << ',' << fmt(r.train_accuracy) << ',' << fmt(r.lr) << ','
    << fmt(r.loss_scale) << ',' << (r.skipped ? 1 : 0) << ',' << r.fusion_batches << ','
    << r.ring_calls << ',' << r.hierarchical_calls << ',' << r.allreduce_steps << ','
    << r.bytes_on_wire << ',' << fmt(r.comm_time_s);
  return o.str();
}

namespace {

// Gradient groups in the order backward produces them: last layer first,
// weight before bias within a layer.
std::vector<int> backward_order(const toy::ToyNet& net) {
  std::vector<int> order;
  const auto& layers = net.layers();
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (it->first_group >= 0) order.push_back(it->first_group);
    if (it->second_group >= 0) order.push_back(it->second_group);
  }
  return order;
}

class GradientSync {
 public:
  GradientSync(const ExperimentConfig& cfg, const collectives::Topology& topo)
      : cfg_(cfg), topo_(topo) {
    link_.inter = netsim::LinkParams{cfg.link_alpha, cfg.link_bandwidth};
    if (cfg.intra_bandwidth > 0.0) {
      link_.intra = netsim::LinkParams{cfg.intra_alpha, cfg.intra_bandwidth};
    }
    if (cfg.transport == "tcp" && cfg.workers > 1) {
      cluster_ = std::make_unique<tcp::LocalCluster>(static_cast<int>(cfg.workers));
    }
  }

  // All-reduces (mean) one fused batch per worker; returns rank 0's result.
  std::vector<float> reduce(const std::vector<fusion::FusedBatch>& batches, MetricsRow& row,
                            std::optional<tcp::FaultInjection> fault) {
    const std::size_t elements = batches.front().bytes() / 4;
    const std::size_t eb = cfg_.fp16_allreduce ? 2 : 4;
    const collectives::ReduceSchedule schedule = collectives::make_hybrid_schedule(
        topo_, elements, eb, static_cast<std::size_t>(cfg_.hybrid_eta_bytes));
    const auto op = collectives::ReduceOp::kMean;

    std::vector<std::vector<float>> outputs;
    if (cfg_.fp16_allreduce) {
      std::vector<std::vector<halfprec::HalfBits>> in;
      for (const auto& b : batches) in.push_back(halfprec::to_half(fusion::payload_as_floats(b.payload)));
      std::vector<std::vector<halfprec::HalfBits>> out =
          cluster_ ? cluster_->allreduce_f16(schedule, in, op)
                   : collectives::execute_in_memory(schedule, std::move(in), op);
      for (const auto& o : out) outputs.push_back(halfprec::to_float(o));
    } else {
      std::vector<std::vector<float>> in;
      for (const auto& b : batches) in.push_back(fusion::payload_as_floats(b.payload));
      outputs = cluster_ ? cluster_->allreduce(schedule, in, op, fault)
                         : collectives::execute_in_memory(schedule, std::move(in), op);
    }
    for (const auto& o : outputs) {
      if (o != outputs.front()) throw std::logic_error("all-reduce outputs differ across ranks");
    }

    const netsim::SimReport sim = netsim::simulate(schedule, link_);
    if (schedule.algorithm == collectives::Algorithm::kRing) {
      ++row.ring_calls;
    } else {
      ++row.hierarchical_calls;
    }
    row.allreduce_steps += sim.total_steps;
    row.bytes_on_wire += sim.bytes_on_wire;
    row.comm_time_s += sim.total_time;
    return outputs.front();
  }

 private:
  const ExperimentConfig& cfg_;
  const collectives::Topology& topo_;
  netsim::LinkModel link_;
  std::unique_ptr<tcp::LocalCluster> cluster_;
};

}  // namespace

TrainResult train(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto p = static_cast<std::size_t>(cfg.workers);
  const collectives::Topology topo(static_cast<int>(cfg.workers),
                                   static_cast<int>(cfg.group_size));
  const toy::Dataset data = toy::make_synthetic_dataset(
      cfg.seed, p * static_cast<std::size_t>(cfg.batch_per_worker),
      static_cast<std::size_t>(cfg.classes), static_cast<std::size_t>(cfg.input_dim),
      static_cast<float>(cfg.data_spread));
  if (data.size() == 0) throw ContractViolation("dataset is empty; nothing to train on");

  std::vector<toy::Batch> shards;
  for (std::size_t w = 0; w < p; ++w) shards.push_back(toy::make_batch(data.shard(w, p)));

  toy::NetSpec spec;
  spec.input_dim = static_cast<std::size_t>(cfg.input_dim);
  for (std::int64_t h : cfg.hidden) spec.hidden.push_back(static_cast<std::size_t>(h));
  spec.outputs = static_cast<std::size_t>(cfg.classes);
  spec.hidden_bn = cfg.hidden_bn;
  spec.insert_pre_classifier_bn = cfg.pre_classifier_bn;
  lars::ExemptionPolicy policy;
  policy.exempt_bias = cfg.exempt_bias;
  policy.exempt_bn = cfg.exempt_bn;
  policy.lars_on_weights = cfg.lars;
  // One model instance serves every replica: replicas start identical and
  // only ever apply the same all-reduced update.
  toy::ToyNet net(spec, cfg.seed * 0x9e3779b97f4a7c15ull + 1, policy);
  auto& groups = net.groups();

  lars::LarsConfig lc;
  lc.eta = static_cast<float>(cfg.lars_eta);
  lc.weight_decay = static_cast<float>(cfg.weight_decay);
  lc.momentum = static_cast<float>(cfg.momentum);
  lc.schedule.kind = lars::ScheduleKind::kLinearWarmupThenPoly;
  lc.schedule.base_lr = static_cast<float>(cfg.base_lr);
  lc.schedule.warmup_steps = static_cast<std::uint64_t>(cfg.warmup_steps);
  lc.schedule.total_steps = static_cast<std::uint64_t>(cfg.steps);
  lc.schedule.poly_power = static_cast<float>(cfg.poly_power);
  lc.schedule.end_lr = static_cast<float>(cfg.end_lr);
  lc.validate();

  const toy::Precision precision = toy::precision_from_string(cfg.precision);
  halfprec::LossScale scaler = halfprec::LossScale::fixed(1.0f);
  if (precision == toy::Precision::kMixed) {
    halfprec::LossScaleOptions o;
    o.policy = cfg.loss_scale == "dynamic" ? halfprec::LossScalePolicy::kDynamic
                                           : halfprec::LossScalePolicy::kFixed;
    o.initial_scale = static_cast<float>(cfg.loss_scale_initial);
    scaler = halfprec::LossScale(o);
  }

  TrainResult result;
  GradientSync sync(cfg, topo);
  const std::vector<int> order = backward_order(net);

  for (std::uint64_t step = 0; step < static_cast<std::uint64_t>(cfg.steps); ++step) {
    MetricsRow row;
    row.step = step;
    row.lr = lars::schedule_lr(lc.schedule, step);
    const float scale = scaler.scale();
    row.loss_scale = scale;

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<std::vector<std::vector<float>>> grads(p);
    for (std::size_t w = 0; w < p; ++w) {
      const toy::StepResult r = net.forward_backward(shards[w], precision, scale);
      loss_sum += r.loss;
      correct += r.correct;
      for (const auto& g : groups) grads[w].push_back(g.grad);
      if (w == 0) {
        for (const auto& a : r.activations) {
          result.activation_trace.push_back(toy::to_json_line(step, a));
        }
      }
    }
    row.loss = loss_sum / static_cast<double>(p);
    row.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());

    std::optional<tcp::FaultInjection> fault;
    if (cfg.tcp_fault_rank >= 0 && static_cast<std::uint64_t>(cfg.tcp_fault_step) == step) {
      fault = tcp::FaultInjection{static_cast<int>(cfg.tcp_fault_rank), 0};
    }

    std::vector<fusion::FusionBuffer> pools(p, fusion::FusionBuffer(
                                                   static_cast<std::size_t>(cfg.fusion_theta_bytes)));
    std::vector<std::vector<float>> reduced(groups.size());
    std::uint64_t batch_index = 0;
    auto handle = [&](std::vector<fusion::FusedBatch>& batches) {
      result.fusion_trace.push_back(
          fusion::to_json_line(fusion::make_trace_record(step, batch_index++, batches.front())));
      ++row.fusion_batches;
      fusion::FusedBatch out;
      out.payload = fusion::floats_as_payload(sync.reduce(batches, row, fault));
      out.unpack_map = batches.front().unpack_map;
      fault.reset();
      for (const auto& t : fusion::unpack(out)) {
        const auto it = std::find_if(groups.begin(), groups.end(),
                                     [&](const lars::ParamGroup& g) { return g.name == t.id.layer; });
        reduced[static_cast<std::size_t>(it - groups.begin())] =
            fusion::payload_as_floats(t.payload);
      }
    };

    try {
      std::uint32_t seq = 0;
      for (int gi : order) {
        std::vector<fusion::FusedBatch> emitted;
        for (std::size_t w = 0; w < p; ++w) {
          auto b = pools[w].enqueue(fusion::GradientTensor{
              fusion::TensorId{groups[gi].name, seq}, fusion::floats_as_payload(grads[w][gi])});
          if (b) emitted.push_back(std::move(*b));
        }
        ++seq;
        if (!emitted.empty()) handle(emitted);
      }
      std::vector<fusion::FusedBatch> rest;
      for (auto& pool : pools) {
        if (auto b = pool.flush()) rest.push_back(std::move(*b));
      }
      if (!rest.empty()) handle(rest);
    } catch (const tcp::CollectiveAborted& e) {
      result.aborted = true;
      result.abort_reason = e.what();
    } catch (const tcp::TransportError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
    }
    if (result.aborted) {
      row.skipped = true;
      result.rows.push_back(row);
      break;
    }

    bool finite = true;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      groups[g].grad = std::move(reduced[g]);
      finite = finite && halfprec::LossScale::all_finite(groups[g].grad);
    }
    if (!finite) {
      scaler.update(true);
      row.skipped = true;
    } else {
      if (scale != 1.0f) {
        for (auto& g : groups) {
          for (float& v : g.grad) v /= scale;
        }
      }
      scaler.update(false);
      row.skipped = lars::lars_step(groups, lc, step) != lars::StepStatus::kApplied;
    }
    result.rows.push_back(row);
  }

  double acc = 0.0;
  double loss = 0.0;
  for (std::size_t w = 0; w < p; ++w) {
    acc += net.accuracy(data.shard(w, p));
    loss += net.loss(shards[w], precision);
  }
  result.final_train_accuracy = acc / static_cast<double>(p);
  result.final_loss = loss / static_cast<double>(p);
  return result;
}

namespace {

Json summarize(const TrainResult& r) {
  Json j;
  std::uint64_t steps = 0, bytes = 0, ring = 0, hier = 0, skipped = 0;
  double time = 0.0;
  for (const MetricsRow& row : r.rows) {
    steps += row.allreduce_steps;
    bytes += row.bytes_on_wire;
    ring += row.ring_calls;
    hier += row.hierarchical_calls;
    skipped += row.skipped ? 1 : 0;
    time += row.comm_time_s;
  }
  j["steps_completed"] = r.rows.size() - (r.aborted ? 1 : 0);
  j["final_loss"] = r.final_loss;
  j["final_train_accuracy"] = r.final_train_accuracy;
  j["skipped_steps"] = skipped;
  j["ring_calls"] = ring;
  j["hierarchical_calls"] = hier;
  j["total_allreduce_steps"] = steps;
  j["total_bytes_on_wire"] = bytes;
  j["modeled_comm_time_s"] = time;
  j["aborted"] = r.aborted;
  if (r.aborted) j["abort_reason"] = r.abort_reason;
  return j;
}

void write_run(const fs::path& dir, const TrainResult& r) {
  fs::create_directories(dir);
  std::string csv = join(metrics_header(), ",") + "\n";
  for (const MetricsRow& row : r.rows) csv += to_csv_line(row) + "\n";
  write_text(dir / "metrics.csv", csv);
  write_lines(dir / "fusion.jsonl", r.fusion_trace);
  write_lines(dir / "activations.jsonl", r.activation_trace);
}

}  // namespace

std::string stepcount_table(std::int64_t p, std::int64_t k) {
  const collectives::Topology topo(static_cast<int>(p), static_cast<int>(k));
  const auto elements = static_cast<std::size_t>(p);
  const auto ring = collectives::make_ring_schedule(topo, elements, 4).total_steps();
  const auto hier = collectives::make_hierarchical_schedule(topo, elements, 4).total_steps();
  std::ostringstream o;
  o << "algorithm,p,k,formula,formula_steps,generated_steps\n";
  o << "ring," << p << ',' << k << ",2(p-1),"
    << collectives::ring_step_count(static_cast<std::uint64_t>(p)) << ',' << ring << "\n";
  o << "hierarchical," << p << ',' << k << ",4(k-1)+2(p/k-1),"
    << collectives::hierarchical_step_count(static_cast<std::uint64_t>(p),
                                            static_cast<std::uint64_t>(k))
    << ',' << hier << "\n";
  return o.str();
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  validate(cfg);
  fs::create_directories(dir);
  RunArtifacts art;
  art.dir = dir;
  Json& report = art.report;
  report["preset"] = cfg.preset;
  report["config_hash"] = hash_hex(config_hash(cfg));
  report["config"] = to_json(cfg);

  auto ablation = [&](const char* on_name, ExperimentConfig on, const char* off_name,
                      ExperimentConfig off) {
    const TrainResult a = train(on);
    const TrainResult b = train(off);
    write_run(dir / on_name, a);
    write_run(dir / off_name, b);
    report["variants"][on_name] = summarize(a);
    report["variants"][off_name] = summarize(b);
    const double gap = a.final_train_accuracy - b.final_train_accuracy;
    report["final_accuracy_gap"] = gap;
    report["headline_pass"] = gap >= 0.0;
    art.aborted = a.aborted || b.aborted;
  };

  if (cfg.preset == "lars-ablation") {
    ExperimentConfig on = cfg, off = cfg;
    on.lars = true;
    off.lars = false;
    ablation("lars_on", on, "lars_off", off);
  } else if (cfg.preset == "decay-ablation") {
    ExperimentConfig on = cfg, off = cfg;
    on.exempt_bias = on.exempt_bn = true;
    off.exempt_bias = off.exempt_bn = false;
    ablation("exempt", on, "regularize_all", off);
  } else if (cfg.preset == "stepcount-vs-paper") {
    const std::string table = stepcount_table(cfg.workers, cfg.group_size);
    write_text(dir / "steps.csv", table);
    const auto p = static_cast<std::uint64_t>(cfg.workers);
    const auto k = static_cast<std::uint64_t>(cfg.group_size);
    const collectives::Topology topo(static_cast<int>(p), static_cast<int>(k));
    const std::size_t ring = collectives::make_ring_schedule(topo, p, 4).total_steps();
    const std::size_t hier = collectives::make_hierarchical_schedule(topo, p, 4).total_steps();
    report["ring_steps"] = ring;
    report["hierarchical_steps"] = hier;
    report["step_ratio"] = static_cast<double>(hier) / static_cast<double>(ring);
    report["headline_pass"] = ring == collectives::ring_step_count(p) &&
                              hier == collectives::hierarchical_step_count(p, k);
  } else {
    const TrainResult r = train(cfg);
    write_run(dir, r);
    report["summary"] = summarize(r);
    art.aborted = r.aborted;
  }
  report["aborted"] = art.aborted;
  write_text(dir / "report.json", report.dump(2) + "\n");
  return art;
}

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(fs::path path) {
  if (fs::is_directory(path)) path /= "metrics.csv";
  std::ifstream in(path);
  if (!in) throw CompareError("cannot read " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw CompareError(path.string() + " is empty");
  csv.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != csv.header.size()) {
      throw CompareError(path.string() + ": row with " + std::to_string(cells.size()) +
                         " cells under a " + std::to_string(csv.header.size()) +
                         "-column header");
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

double parse_cell(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw CompareError("non-numeric cell '" + s + "'");
  return v;
}

}  // namespace

CompareReport compare_runs(const fs::path& a, const fs::path& b,
                           const std::map<std::string, double>& tolerances) {
  const Csv x = read_csv(a);
  const Csv y = read_csv(b);
  if (x.header != y.header) {
    throw CompareError("metric schemas differ: [" + join(x.header, ",") + "] vs [" +
                       join(y.header, ",") + "]");
  }
  if (x.rows.size() != y.rows.size()) {
    throw CompareError("runs differ in length: " + std::to_string(x.rows.size()) + " vs " +
                       std::to_string(y.rows.size()) + " rows");
  }
  for (const auto& [name, tol] : tolerances) {
    if (std::find(x.header.begin(), x.header.end(), name) == x.header.end()) {
      throw CompareError("tolerance given for unknown metric '" + name + "'");
    }
  }
  CompareReport report;
  for (std::size_t c = 0; c < x.header.size(); ++c) {
    MetricDelta d;
    d.metric = x.header[c];
    if (auto it = tolerances.find(d.metric); it != tolerances.end()) d.tolerance = it->second;
    for (std::size_t r = 0; r < x.rows.size(); ++r) {
      const double u = parse_cell(x.rows[r][c]);
      const double v = parse_cell(y.rows[r][c]);
      double delta = std::fabs(u - v);
      if (std::isnan(u) && std::isnan(v)) delta = 0.0;
      if (std::isnan(u) != std::isnan(v)) delta = INFINITY;
      if (!(delta <= d.max_abs_delta)) d.max_abs_delta = delta;
    }
    d.pass = d.max_abs_delta <= d.tolerance;
    report.pass = report.pass && d.pass;
    report.metrics.push_back(d);
  }
  return report;
}

Json to_json(const CompareReport& report) {
  Json j;
  j["pass"] = report.pass;
  Json metrics = Json::array();
  for (const MetricDelta& d : report.metrics) {
    metrics.push_back(Json{{"metric", d.metric},
                           {"max_abs_delta", d.max_abs_delta},
                           {"tolerance", d.tolerance},
                           {"pass", d.pass}});
  }
  j["metrics"] = std::move(metrics);
  return j;
}

namespace {

// AlexNet-sized gradient tensors (FP32 bytes) in backward order.
std::vector<std::int64_t> alexnet_tensor_bytes() {
  return {4 * 4096000, 4 * 1000,   4 * 16777216, 4 * 4096,   4 * 37748736, 4 * 4096,
          4 * 442368,  4 * 256,    4 * 663552,   4 * 384,    4 * 884736,   4 * 384,
          4 * 307200,  4 * 256,    4 * 34848,    4 * 96};
}

// Same emission rule as FusionBuffer, on sizes only.
std::vector<std::int64_t> fused_sizes(const std::vector<std::int64_t>& tensors,
                                      std::int64_t theta) {
  std::vector<std::int64_t> out;
  std::int64_t pending = 0;
  for (std::int64_t t : tensors) {
    pending += t;
    if (pending > theta) {
      out.push_back(pending);
      pending = 0;
    }
  }
  if (pending > 0) out.push_back(pending);
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
  const std::vector<std::int64_t> tensors =
      cfg.tensor_bytes.empty() ? alexnet_tensor_bytes() : cfg.tensor_bytes;
  for (std::int64_t t : tensors) {
    if (t <= 0 || t % 4 != 0) {
      throw std::invalid_argument("tensor sizes must be positive multiples of 4 bytes");
    }
  }
  netsim::LinkModel link;
  link.inter = netsim::LinkParams{cfg.link_alpha, cfg.link_bandwidth};
  link.validate();

  SweepResult result;
  std::ostringstream grid;
  grid << "k,theta_bytes,eta_bytes,batches,ring_calls,hierarchical_calls,steps,modeled_time_s\n";
  std::ostringstream cross;
  cross << "k,bytes,ring_time_s,hierarchical_time_s,faster\n";

  for (std::int64_t k : cfg.group_sizes) {
    const collectives::Topology topo(static_cast<int>(cfg.workers), static_cast<int>(k));
    std::map<std::pair<int, std::int64_t>, netsim::SimReport> memo;
    auto cost = [&](collectives::Algorithm alg, std::int64_t bytes) -> const netsim::SimReport& {
      const auto key = std::make_pair(static_cast<int>(alg), bytes);
      auto it = memo.find(key);
      if (it == memo.end()) {
        const auto s = collectives::make_schedule(alg, topo, static_cast<std::size_t>(bytes / 4), 4);
        it = memo.emplace(key, netsim::simulate(s, link)).first;
      }
      return it->second;
    };
    for (std::int64_t theta : cfg.thetas) {
      const auto batches = fused_sizes(tensors, theta);
      for (std::int64_t eta : cfg.etas) {
        std::uint64_t ring = 0, hier = 0, steps = 0;
        double time = 0.0;
        for (std::int64_t b : batches) {
          const auto alg = collectives::select_hybrid(static_cast<std::size_t>(b),
                                                      static_cast<std::size_t>(eta));
          (alg == collectives::Algorithm::kRing ? ring : hier) += 1;
          const auto& r = cost(alg, b);
          steps += r.total_steps;
          time += r.total_time;
        }
        grid << k << ',' << theta << ',' << eta << ',' << batches.size() << ',' << ring << ','
             << hier << ',' << steps << ',' << fmt(time) << "\n";
      }
    }
    const auto sweep = netsim::sweep_crossover(topo, link, 4, 1, 1 << 16);
    for (const auto& pt : sweep.points) {
      cross << k << ',' << pt.bytes << ',' << fmt(pt.ring_time) << ','
            << fmt(pt.hierarchical_time) << ','
            << (pt.hierarchical_time < pt.ring_time ? "hierarchical" : "ring") << "\n";
    }
    if (sweep.crossover_bytes) {
      result.crossover_bytes[k] = static_cast<std::int64_t>(*sweep.crossover_bytes);
    }
  }
  result.grid_csv = grid.str();
  result.crossover_csv = cross.str();
  return result;
}

}  // namespace gradsync::experiment
