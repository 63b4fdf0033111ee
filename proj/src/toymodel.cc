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

#include "gradsync/toymodel.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gradsync/halfprec.h"
#include "json.hpp"

namespace gradsync::toy {

using lars::ParamGroup;
using lars::ParamKind;

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ContractViolation("dataset slice out of range");
  Dataset out;
  out.classes = classes;
  out.dim = dim;
  out.features = Matrix(end - begin, dim);
  std::copy(features.data.begin() + static_cast<std::ptrdiff_t>(begin * dim),
            features.data.begin() + static_cast<std::ptrdiff_t>(end * dim),
            out.features.data.begin());
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

Dataset Dataset::shard(std::size_t i, std::size_t w) const {
  if (w == 0 || i >= w || size() % w != 0) {
    throw ContractViolation("dataset of " + std::to_string(size()) +
                            " examples does not split into " + std::to_string(w) +
                            " equal shards");
  }
  const std::size_t n = size() / w;
  return slice(i * n, (i + 1) * n);
}

Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t classes,
                               std::size_t dim, float spread) {
  if (classes == 0 || dim == 0) throw std::invalid_argument("classes and dim must be positive");
  if (!(spread > 0.0f)) throw std::invalid_argument("spread must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);

  std::vector<float> centers(classes * dim);
  for (float& c : centers) c = 4.0f * normal(rng);

  Dataset d;
  d.classes = classes;
  d.dim = dim;
  d.features = Matrix(n, dim);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % classes;
    d.labels[i] = static_cast<std::int32_t>(label);
    for (std::size_t j = 0; j < dim; ++j) {
      d.features.at(i, j) = centers[label * dim + j] + spread * normal(rng);
    }
  }
  return d;
}

BatchNormLayer::BatchNormLayer(std::size_t features, float epsilon)
    : gamma(features, 1.0f),
      beta(features, 0.0f),
      eps(epsilon),
      running_mean(features, 0.0f),
      running_var(features, 1.0f) {}

void BatchNormLayer::validate() const {
  if (!(eps > 0.0f)) throw ContractViolation("batch norm eps must be > 0");
  if (beta.size() != gamma.size() || running_mean.size() != gamma.size() ||
      running_var.size() != gamma.size()) {
    throw ContractViolation("batch norm parameter lengths differ");
  }
}

Matrix bn_forward(const Matrix& x, std::span<const float> gamma, std::span<const float> beta,
                  float eps, BnMode mode, BnCache* cache, std::span<const float> running_mean,
                  std::span<const float> running_var) {
  if (gamma.size() != x.cols || beta.size() != x.cols) {
    throw ContractViolation("batch norm width " + std::to_string(gamma.size()) +
                            " does not match input width " + std::to_string(x.cols));
  }
  if (!(eps > 0.0f)) throw ContractViolation("batch norm eps must be > 0");
  const std::size_t n = x.rows;
  const std::size_t f = x.cols;
  std::vector<float> mean(f);
  std::vector<float> var(f);
  if (mode == BnMode::kTraining) {
    if (n < 2) throw ContractViolation("batch norm training needs a batch of at least 2");
    for (std::size_t j = 0; j < f; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += x.at(i, j);
      const double m = s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x.at(i, j) - m;
        ss += d * d;
      }
      mean[j] = static_cast<float>(m);
      var[j] = static_cast<float>(ss / static_cast<double>(n));
    }
  } else {
    if (running_mean.size() != f || running_var.size() != f) {
      throw ContractViolation("batch norm inference needs running statistics");
    }
    mean.assign(running_mean.begin(), running_mean.end());
    var.assign(running_var.begin(), running_var.end());
  }

  std::vector<float> inv_std(f);
  for (std::size_t j = 0; j < f; ++j) {
    inv_std[j] = static_cast<float>(1.0 / std::sqrt(static_cast<double>(var[j]) + eps));
  }
  Matrix xhat(n, f);
  Matrix y(n, f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) {
      const float h = (x.at(i, j) - mean[j]) * inv_std[j];
      xhat.at(i, j) = h;
      y.at(i, j) = gamma[j] * h + beta[j];
    }
  }
  if (cache != nullptr) {
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = std::move(inv_std);
    cache->xhat = std::move(xhat);
  }
  return y;
}

Matrix bn_forward(const Matrix& x, const BatchNormLayer& bn, BnCache* cache) {
  bn.validate();
  return bn_forward(x, bn.gamma, bn.beta, bn.eps, BnMode::kTraining, cache);
}

BnGrads bn_backward(const Matrix& dy, std::span<const float> gamma, const BnCache& cache) {
  const std::size_t n = dy.rows;
  const std::size_t f = dy.cols;
  if (cache.xhat.rows != n || cache.xhat.cols != f || gamma.size() != f) {
    throw ContractViolation("batch norm backward shape mismatch");
  }
  BnGrads g;
  g.dx = Matrix(n, f);
  g.dgamma.resize(f);
  g.dbeta.resize(f);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < f; ++j) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_dy += dy.at(i, j);
      sum_dy_xhat += static_cast<double>(dy.at(i, j)) * cache.xhat.at(i, j);
    }
    g.dbeta[j] = static_cast<float>(sum_dy);
    g.dgamma[j] = static_cast<float>(sum_dy_xhat);
    // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
    const double scale = static_cast<double>(gamma[j]) * cache.inv_std[j];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = dy.at(i, j) - sum_dy * inv_n - cache.xhat.at(i, j) * sum_dy_xhat * inv_n;
      g.dx.at(i, j) = static_cast<float>(scale * v);
    }
  }
  return g;
}

std::string_view to_string(Precision p) { return p == Precision::kFp32 ? "fp32" : "mixed"; }

Precision precision_from_string(std::string_view s) {
  if (s == "fp32") return Precision::kFp32;
  if (s == "mixed") return Precision::kMixed;
  throw std::invalid_argument("unknown precision '" + std::string(s) + "'");
}

Batch make_batch(const Dataset& data) {
  Batch b;
  b.x = data.features;
  b.labels = data.labels;
  return b;
}

std::string to_json_line(std::uint64_t step, const ActivationStats& stats) {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["layer"] = stats.layer;
  j["max"] = stats.max;
  j["mean"] = stats.mean;
  j["var"] = stats.var;
  return j.dump();
}

namespace {

void quantize(Matrix& m) { halfprec::quantize_in_place(m.data); }

ActivationStats summarize(const std::string& layer, const Matrix& m) {
  ActivationStats s;
  s.layer = layer;
  if (m.data.empty()) return s;
  double sum = 0.0;
  double max_abs = 0.0;
  for (float v : m.data) {
    sum += v;
    max_abs = std::max(max_abs, static_cast<double>(std::fabs(v)));
  }
  const double mean = sum / static_cast<double>(m.data.size());
  double ss = 0.0;
  for (float v : m.data) ss += (v - mean) * (v - mean);
  s.max = static_cast<float>(max_abs);
  s.mean = static_cast<float>(mean);
  s.var = static_cast<float>(ss / static_cast<double>(m.data.size()));
  return s;
}

// y = x W^T + b with W stored out x in.
Matrix dense_forward(const Matrix& x, std::span<const float> w, std::span<const float> b,
                     std::size_t out) {
  const std::size_t in = x.cols;
  Matrix y(x.rows, out);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) {
        acc += static_cast<double>(x.at(i, k)) * w[o * in + k];
      }
      y.at(i, o) = static_cast<float>(acc);
    }
  }
  return y;
}

struct DenseGrads {
  Matrix dx;
  std::vector<float> dw;
  std::vector<float> db;
};

DenseGrads dense_backward(const Matrix& x, std::span<const float> w, const Matrix& dy) {
  const std::size_t in = x.cols;
  const std::size_t out = dy.cols;
  DenseGrads g;
  g.dx = Matrix(x.rows, in);
  g.dw.resize(out * in);
  g.db.resize(out);
  for (std::size_t o = 0; o < out; ++o) {
    double db = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) db += dy.at(i, o);
    g.db[o] = static_cast<float>(db);
    for (std::size_t k = 0; k < in; ++k) {
      double dw = 0.0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        dw += static_cast<double>(dy.at(i, o)) * x.at(i, k);
      }
      g.dw[o * in + k] = static_cast<float>(dw);
    }
  }
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t k = 0; k < in; ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) {
        acc += static_cast<double>(dy.at(i, o)) * w[o * in + k];
      }
      g.dx.at(i, k) = static_cast<float>(acc);
    }
  }
  return g;
}

// Weights as used by compute in the given precision.
std::vector<float> weights_in_use(const ParamGroup& g, Precision precision) {
  return precision == Precision::kMixed ? g.working_weights() : g.master_w;
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

struct ToyNet::Tape {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<BnCache> bn;     // indexed by layer
  std::vector<std::vector<float>> params;  // weights in use, by group
};

ToyNet::ToyNet(const NetSpec& spec, std::uint64_t seed, const lars::ExemptionPolicy& policy)
    : spec_(spec) {
  if (spec.input_dim == 0 || spec.outputs == 0) {
    throw ContractViolation("input and output widths must be positive");
  }
  if (!(spec.bn_eps > 0.0f)) throw ContractViolation("batch norm eps must be > 0");
  std::mt19937_64 rng(seed);

  auto add_dense = [&](const std::string& name, std::size_t in, std::size_t out) {
    std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(in)));
    std::vector<float> w(in * out);
    for (float& v : w) v = normal(rng);
    Layer l;
    l.type = LayerType::kDense;
    l.name = name;
    l.in = in;
    l.out = out;
    l.first_group = static_cast<int>(groups_.size());
    groups_.push_back(lars::make_param_group(name + "/w", ParamKind::kWeight, std::move(w), policy));
    l.second_group = static_cast<int>(groups_.size());
    groups_.push_back(lars::make_param_group(name + "/b", ParamKind::kBias,
                                             std::vector<float>(out, 0.0f), policy));
    layers_.push_back(std::move(l));
  };
  auto add_bn = [&](const std::string& name, std::size_t width) {
    Layer l;
    l.type = LayerType::kBatchNorm;
    l.name = name;
    l.in = l.out = width;
    l.first_group = static_cast<int>(groups_.size());
    groups_.push_back(lars::make_param_group(name + "/gamma", ParamKind::kBnGamma,
                                             std::vector<float>(width, 1.0f), policy));
    l.second_group = static_cast<int>(groups_.size());
    groups_.push_back(lars::make_param_group(name + "/beta", ParamKind::kBnBeta,
                                             std::vector<float>(width, 0.0f), policy));
    l.running_mean.assign(width, 0.0f);
    l.running_var.assign(width, 1.0f);
    layers_.push_back(std::move(l));
  };
  auto add_relu = [&](const std::string& name, std::size_t width) {
    Layer l;
    l.type = LayerType::kRelu;
    l.name = name;
    l.in = l.out = width;
    layers_.push_back(std::move(l));
  };

  std::size_t width = spec.input_dim;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    const std::string idx = std::to_string(i);
    if (spec.hidden[i] == 0) throw ContractViolation("hidden width must be positive");
    add_dense("dense" + idx, width, spec.hidden[i]);
    width = spec.hidden[i];
    if (spec.hidden_bn) add_bn("bn" + idx, width);
    add_relu("relu" + idx, width);
  }
  if (spec.insert_pre_classifier_bn) add_bn("bn_pre", width);
  add_dense("classifier", width, spec.outputs);
}

void ToyNet::refresh_working_copies() {
  for (ParamGroup& g : groups_) g.refresh_working_copy();
}

Matrix ToyNet::run_forward(const Matrix& x_in, Precision precision, bool training, Tape* tape,
                           std::vector<ActivationStats>* stats) const {
  if (x_in.cols != spec_.input_dim) {
    throw ContractViolation("input width " + std::to_string(x_in.cols) + ", net expects " +
                            std::to_string(spec_.input_dim));
  }
  const bool mixed = precision == Precision::kMixed;
  Matrix x = x_in;
  if (mixed) quantize(x);
  if (tape != nullptr) {
    tape->inputs.clear();
    tape->bn.assign(layers_.size(), BnCache{});
    tape->params.assign(groups_.size(), {});
  }
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    if (tape != nullptr) tape->inputs.push_back(x);
    switch (l.type) {
      case LayerType::kDense: {
        std::vector<float> w = weights_in_use(groups_[l.first_group], precision);
        std::vector<float> b = weights_in_use(groups_[l.second_group], precision);
        x = dense_forward(x, w, b, l.out);
        if (tape != nullptr) {
          tape->params[l.first_group] = std::move(w);
          tape->params[l.second_group] = std::move(b);
        }
        break;
      }
      case LayerType::kBatchNorm: {
        std::vector<float> gamma = weights_in_use(groups_[l.first_group], precision);
        std::vector<float> beta = weights_in_use(groups_[l.second_group], precision);
        const bool batch_stats = training || x.rows >= 2;
        x = bn_forward(x, gamma, beta, spec_.bn_eps,
                       batch_stats ? BnMode::kTraining : BnMode::kInference,
                       tape != nullptr ? &tape->bn[li] : nullptr, l.running_mean,
                       l.running_var);
        if (tape != nullptr) {
          tape->params[l.first_group] = std::move(gamma);
          tape->params[l.second_group] = std::move(beta);
        }
        break;
      }
      case LayerType::kRelu:
        for (float& v : x.data) v = std::max(v, 0.0f);
        break;
    }
    if (mixed) quantize(x);
    if (stats != nullptr) stats->push_back(summarize(l.name, x));
  }
  return x;
}

StepResult ToyNet::forward_backward(const Batch& batch, Precision precision, float loss_scale) {
  const std::size_t n = batch.x.rows;
  if (n == 0) throw ContractViolation("forward_backward needs a nonempty batch");
  if (!(loss_scale > 0.0f)) throw ContractViolation("loss scale must be positive");
  const bool mixed = precision == Precision::kMixed;

  Tape tape;
  StepResult result;
  const Matrix z = run_forward(batch.x, precision, true, &tape, &result.activations);

  // Loss and dL/dz, both per-example means.
  Matrix dz(n, z.cols);
  double loss = 0.0;
  if (spec_.loss == LossKind::kSoftmaxCrossEntropy) {
    if (batch.labels.size() != n) throw ContractViolation("one label per example required");
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::size_t>(batch.labels[i]);
      if (label >= z.cols) throw ContractViolation("label out of range");
      double zmax = z.at(i, 0);
      std::size_t arg = 0;
      for (std::size_t c = 1; c < z.cols; ++c) {
        if (z.at(i, c) > zmax) {
          zmax = z.at(i, c);
          arg = c;
        }
      }
      if (arg == label) ++result.correct;
      double denom = 0.0;
      for (std::size_t c = 0; c < z.cols; ++c) denom += std::exp(z.at(i, c) - zmax);
      loss += std::log(denom) - (z.at(i, label) - zmax);
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double p = std::exp(z.at(i, c) - zmax) / denom;
        dz.at(i, c) = static_cast<float>(
            (p - (c == label ? 1.0 : 0.0)) * loss_scale / static_cast<double>(n));
      }
    }
  } else {
    if (batch.targets.rows != n || batch.targets.cols != z.cols) {
      throw ContractViolation("squared loss needs one target row per example");
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double d = static_cast<double>(z.at(i, c)) - batch.targets.at(i, c);
        loss += 0.5 * d * d;
        dz.at(i, c) = static_cast<float>(d * loss_scale / static_cast<double>(n));
      }
    }
  }
  result.loss = static_cast<float>(loss / static_cast<double>(n));
  if (!std::isfinite(result.loss)) result.non_finite = true;
  if (mixed) quantize(dz);

  Matrix dy = std::move(dz);
  for (std::size_t li = layers_.size(); li-- > 0;) {
    Layer& l = layers_[li];
    const Matrix& x = tape.inputs[li];
    switch (l.type) {
      case LayerType::kDense: {
        DenseGrads g = dense_backward(x, tape.params[l.first_group], dy);
        groups_[l.first_group].grad = std::move(g.dw);
        groups_[l.second_group].grad = std::move(g.db);
        dy = std::move(g.dx);
        break;
      }
      case LayerType::kBatchNorm: {
        const BnCache& cache = tape.bn[li];
        BnGrads g = bn_backward(dy, tape.params[l.first_group], cache);
        groups_[l.first_group].grad = std::move(g.dgamma);
        groups_[l.second_group].grad = std::move(g.dbeta);
        dy = std::move(g.dx);
        const float m = spec_.bn_momentum;
        for (std::size_t j = 0; j < l.out; ++j) {
          l.running_mean[j] = m * l.running_mean[j] + (1.0f - m) * cache.mean[j];
          l.running_var[j] = m * l.running_var[j] + (1.0f - m) * cache.var[j];
        }
        break;
      }
      case LayerType::kRelu:
        for (std::size_t i = 0; i < dy.data.size(); ++i) {
          if (!(x.data[i] > 0.0f)) dy.data[i] = 0.0f;
        }
        break;
    }
    if (mixed) {
      quantize(dy);
      if (l.first_group >= 0) halfprec::quantize_in_place(groups_[l.first_group].grad);
      if (l.second_group >= 0) halfprec::quantize_in_place(groups_[l.second_group].grad);
    }
  }
  for (const ParamGroup& g : groups_) {
    if (!all_finite(g.grad)) result.non_finite = true;
  }
  return result;
}

float ToyNet::loss(const Batch& batch, Precision precision) const {
  const Matrix z = run_forward(batch.x, precision, true, nullptr, nullptr);
  const std::size_t n = z.rows;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec_.loss == LossKind::kSoftmaxCrossEntropy) {
      double zmax = z.at(i, 0);
      for (std::size_t c = 1; c < z.cols; ++c) zmax = std::max<double>(zmax, z.at(i, c));
      double denom = 0.0;
      for (std::size_t c = 0; c < z.cols; ++c) denom += std::exp(z.at(i, c) - zmax);
      loss += std::log(denom) - (z.at(i, static_cast<std::size_t>(batch.labels[i])) - zmax);
    } else {
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double d = static_cast<double>(z.at(i, c)) - batch.targets.at(i, c);
        loss += 0.5 * d * d;
      }
    }
  }
  return static_cast<float>(loss / static_cast<double>(n));
}

std::vector<std::int32_t> ToyNet::predict(const Matrix& x, bool batch_statistics) const {
  const bool batch_mode = batch_statistics && x.rows >= 2;
  const Matrix z = run_forward(x, Precision::kFp32, batch_mode, nullptr, nullptr);
  std::vector<std::int32_t> out(z.rows);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const auto r = z.row(i);
    out[i] = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

float ToyNet::accuracy(const Dataset& data, bool batch_statistics) const {
  if (data.size() == 0) return 0.0f;
  const auto pred = predict(data.features, batch_statistics);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i] ? 1 : 0;
  return static_cast<float>(static_cast<double>(hits) / static_cast<double>(pred.size()));
}

std::vector<std::string> audit(const ToyNet& net) {
  std::vector<std::string> problems;
  const auto& groups = net.groups();
  std::vector<int> owners(groups.size(), 0);
  std::size_t width = net.spec().input_dim;

  auto check = [&](const Layer& l, int idx, ParamKind kind, std::size_t size,
                   const char* role) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= groups.size()) {
      problems.push_back(l.name + ": " + role + " has no parameter group");
      return;
    }
    ++owners[idx];
    const ParamGroup& g = groups[idx];
    if (g.kind != kind) {
      problems.push_back(l.name + ": " + role + " group '" + g.name + "' has kind " +
                         std::string(lars::to_string(g.kind)) + ", expected " +
                         std::string(lars::to_string(kind)));
    }
    if (g.size() != size) {
      problems.push_back(l.name + ": " + role + " group '" + g.name + "' holds " +
                         std::to_string(g.size()) + " values, expected " +
                         std::to_string(size));
    }
    if (g.working_w16.size() != g.size() || g.velocity.size() != g.size()) {
      problems.push_back("group '" + g.name + "' has mismatched state lengths");
    }
  };

  for (const Layer& l : net.layers()) {
    if (l.in != width) {
      problems.push_back(l.name + ": expects width " + std::to_string(l.in) + ", receives " +
                         std::to_string(width));
    }
    switch (l.type) {
      case LayerType::kDense:
        check(l, l.first_group, ParamKind::kWeight, l.in * l.out, "weight");
        check(l, l.second_group, ParamKind::kBias, l.out, "bias");
        break;
      case LayerType::kBatchNorm:
        check(l, l.first_group, ParamKind::kBnGamma, l.out, "gamma");
        check(l, l.second_group, ParamKind::kBnBeta, l.out, "beta");
        if (l.in != l.out) problems.push_back(l.name + ": batch norm changes width");
        break;
      case LayerType::kRelu:
        if (l.first_group >= 0 || l.second_group >= 0) {
          problems.push_back(l.name + ": relu owns parameters");
        }
        break;
    }
    width = l.out;
  }
  if (width != net.spec().outputs) {
    problems.push_back("final width " + std::to_string(width) + " differs from outputs " +
                       std::to_string(net.spec().outputs));
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (owners[i] != 1) {
      problems.push_back("group '" + groups[i].name + "' is owned by " +
                         std::to_string(owners[i]) + " tensors");
    }
  }
  return problems;
}

}  // namespace gradsync::toy
