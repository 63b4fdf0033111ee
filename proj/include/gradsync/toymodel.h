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

#ifndef GRADSYNC_TOYMODEL_H_
#define GRADSYNC_TOYMODEL_H_

// Small dense network with batch normalization, trained through the same
// ParamGroup/LARS machinery as a real model.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gradsync/lars.h"

namespace gradsync::toy {

// Row-major rows x cols matrix. Rows are examples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data).subspan(r * cols, cols);
  }
};

struct Dataset {
  std::size_t classes = 0;
  std::size_t dim = 0;
  Matrix features;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  // Contiguous rows [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
  // Shard i of w equal contiguous shards; size() must divide evenly.
  Dataset shard(std::size_t i, std::size_t w) const;
};

inline constexpr float kDefaultSpread = 1.0f;

// One Gaussian blob per class. Centers are drawn with standard deviation 4,
// points scatter around them with standard deviation `spread`. Examples are
// interleaved by class (label = index mod classes). Throws
// std::invalid_argument for zero classes or dim; n == 0 gives an empty set.
Dataset make_synthetic_dataset(std::uint64_t seed, std::size_t n, std::size_t classes,
                               std::size_t dim, float spread = kDefaultSpread);

// Batch normalization with learned scale (gamma) and shift (beta). Variance
// is the biased batch variance.
struct BatchNormLayer {
  std::vector<float> gamma;
  std::vector<float> beta;
  float eps = 1e-5f;
  std::vector<float> running_mean;
  std::vector<float> running_var;

  explicit BatchNormLayer(std::size_t features, float eps = 1e-5f);
  // Throws ContractViolation on eps <= 0 or mismatched lengths.
  void validate() const;
};

struct BnCache {
  std::vector<float> mean;
  std::vector<float> var;
  std::vector<float> inv_std;
  Matrix xhat;
};

enum class BnMode { kTraining, kInference };

// Training mode normalizes with batch statistics (requires >= 2 rows) and
// fills `cache`; inference mode uses the running statistics.
Matrix bn_forward(const Matrix& x, std::span<const float> gamma, std::span<const float> beta,
                  float eps, BnMode mode, BnCache* cache,
                  std::span<const float> running_mean = {},
                  std::span<const float> running_var = {});
Matrix bn_forward(const Matrix& x, const BatchNormLayer& bn, BnCache* cache);

struct BnGrads {
  Matrix dx;
  std::vector<float> dgamma;
  std::vector<float> dbeta;
};

BnGrads bn_backward(const Matrix& dy, std::span<const float> gamma, const BnCache& cache);

enum class Precision { kFp32, kMixed };
enum class LossKind { kSoftmaxCrossEntropy, kSquared };

std::string_view to_string(Precision p);
Precision precision_from_string(std::string_view s);

struct NetSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden;  // one dense+relu block per entry
  std::size_t outputs = 2;
  bool hidden_bn = true;            // BN between each hidden dense and its relu
  bool insert_pre_classifier_bn = false;
  float bn_eps = 1e-5f;
  float bn_momentum = 0.9f;         // running-statistics decay
  LossKind loss = LossKind::kSoftmaxCrossEntropy;
};

enum class LayerType { kDense, kBatchNorm, kRelu };

struct Layer {
  LayerType type = LayerType::kDense;
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  // ParamGroup indices: dense weight/bias, or bn gamma/beta.
  int first_group = -1;
  int second_group = -1;
  std::vector<float> running_mean;
  std::vector<float> running_var;
};

struct Batch {
  Matrix x;
  std::vector<std::int32_t> labels;  // softmax cross-entropy
  Matrix targets;                    // squared loss
};

Batch make_batch(const Dataset& data);

struct ActivationStats {
  std::string layer;
  float max = 0.0f;  // largest |activation|
  float mean = 0.0f;
  float var = 0.0f;
};

std::string to_json_line(std::uint64_t step, const ActivationStats& stats);

struct StepResult {
  float loss = 0.0f;         // unscaled mean loss
  bool non_finite = false;   // loss or a gradient overflowed
  std::size_t correct = 0;   // argmax hits (softmax loss only)
  std::vector<ActivationStats> activations;
};

class ToyNet {
 public:
  // Dense weights are He-normal from `seed`; biases and beta start at 0,
  // gamma at 1.
  ToyNet(const NetSpec& spec, std::uint64_t seed, const lars::ExemptionPolicy& policy = {});

  const NetSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<lars::ParamGroup>& groups() { return groups_; }
  const std::vector<lars::ParamGroup>& groups() const { return groups_; }

  // Mean loss over the batch; gradients of loss * loss_scale land in each
  // group's grad. Mixed precision rounds activations, the weights in use
  // and every back-propagated gradient through binary16.
  StepResult forward_backward(const Batch& batch, Precision precision,
                              float loss_scale = 1.0f);

  // Loss only, no gradients, no running-statistics update.
  float loss(const Batch& batch, Precision precision = Precision::kFp32) const;

  // Class predictions. BN uses statistics of `x` itself when
  // `batch_statistics` is set (and x has >= 2 rows), running statistics
  // otherwise.
  std::vector<std::int32_t> predict(const Matrix& x, bool batch_statistics = true) const;
  float accuracy(const Dataset& data, bool batch_statistics = true) const;

  // Re-derives every FP16 working copy from its master weights.
  void refresh_working_copies();

 private:
  struct Tape;
  Matrix run_forward(const Matrix& x, Precision precision, bool training, Tape* tape,
                     std::vector<ActivationStats>* stats) const;

  NetSpec spec_;
  std::vector<Layer> layers_;
  std::vector<lars::ParamGroup> groups_;
};

// Structural audit: every trainable tensor of every layer is backed by
// exactly one ParamGroup of the right kind and size, and shapes chain.
// Returns the list of problems; empty means the net is sound.
std::vector<std::string> audit(const ToyNet& net);

}  // namespace gradsync::toy

#endif  // GRADSYNC_TOYMODEL_H_
