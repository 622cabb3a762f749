#pragma once

// Dense rectifier network with exact backpropagation.
//
// Parameter layout (flattened ParamVector): for each layer in order, the
// fan_in x fan_out weight matrix row-major, followed by fan_out biases.
// A layer computes z = a W + b; every layer but the last applies max(z, 0).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "subat/tensor.hpp"

namespace subat {

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n) : values_(n, 0.0) {}
  explicit ParamVector(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  const double* data() const noexcept { return values_.data(); }
  double* data() noexcept { return values_.data(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  double norm() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

struct LayerShape {
  std::size_t fan_in;
  std::size_t fan_out;
  std::size_t offset;  // start of the weight block; biases follow it

  std::size_t weight_count() const noexcept { return fan_in * fan_out; }
  std::size_t bias_offset() const noexcept { return offset + weight_count(); }
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // empty: a single affine layer
  std::size_t classes = 0;

  void validate() const;
  std::vector<LayerShape> layers() const;
  std::size_t param_count() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

class Network {
 public:
  Network(NetworkSpec spec, ParamVector params);

  // Fan-in scaled uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
  // and biases, fully determined by seed.
  static Network initialized(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerShape>& layers() const noexcept { return layers_; }
  const ParamVector& params() const noexcept { return params_; }
  ParamVector& params() noexcept { return params_; }

  ParamVector flatten() const { return params_; }
  void load(const ParamVector& params);

 private:
  NetworkSpec spec_;
  std::vector<LayerShape> layers_;
  ParamVector params_;
};

struct Batch {
  Tensor inputs;            // n x D
  std::vector<int> labels;  // n entries in [0, C)

  std::size_t size() const noexcept { return labels.size(); }
  void validate(std::size_t input_dim, std::size_t classes) const;
};

// What a pass should compute beyond per-sample losses and predictions.
struct PassOptions {
  bool param_grad = false;
  bool input_grad = false;
  bool sample_grad_norms = false;
};

struct PassResult {
  std::vector<double> sample_loss;  // cross-entropy of each row
  std::vector<int> predicted;       // argmax class of each row
  double mean_loss = 0.0;
  ParamVector param_grad;           // gradient of mean_loss
  Tensor input_grad;                // row i: gradient of sample_loss[i] w.r.t. row i
  std::vector<double> sample_grad_norm;  // row i: |grad_w sample_loss[i]|

  std::size_t correct(std::span<const int> labels) const;
};

PassResult run_pass(const Network& net, const Tensor& inputs, std::span<const int> labels,
                    PassOptions options);

Tensor forward(const Network& net, const Tensor& inputs);

std::vector<double> sample_cross_entropy(const Tensor& logits, std::span<const int> labels);
double cross_entropy(const Tensor& logits, std::span<const int> labels);

struct Gradients {
  double loss = 0.0;
  ParamVector param_grad;
  Tensor input_grad;
};

Gradients backward(const Network& net, const Batch& batch);

struct SampleGradNorms {
  std::vector<double> norms;
  double mean = 0.0;
};

// Norm i equals |param_grad| of backward() on the singleton batch {row i}.
SampleGradNorms per_sample_grad_norms(const Network& net, const Batch& batch);

double batch_grad_norm(const Network& net, const Batch& batch);

}  // namespace subat
