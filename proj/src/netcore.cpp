#include "subat/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subat/error.hpp"
#include "subat/kernels.hpp"
#include "subat/rng.hpp"

namespace subat {

namespace {

void transpose(const double* src, std::size_t rows, std::size_t cols, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw DimensionError("expected " + std::to_string(rows) + " labels, got " +
                         std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

void check_inputs(const Tensor& inputs, std::size_t input_dim) {
  if (inputs.rank() != 2 || inputs.cols() != input_dim) {
    throw DimensionError("inputs must be n x " + std::to_string(input_dim));
  }
}

// Forward through every layer. acts[l] holds the input of layer l (acts[0]
// aliases the caller's inputs); the returned buffer holds the logits.
struct Activations {
  std::vector<std::vector<double>> hidden;  // outputs of layers 0..L-2, post-rectifier
  std::vector<double> logits;
};

Activations propagate(const Network& net, const Tensor& inputs) {
  const auto& layers = net.layers();
  const std::size_t n = inputs.rows();
  const double* w = net.params().data();
  Activations out;
  out.hidden.resize(layers.size() - 1);
  const double* a = inputs.data();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerShape& s = layers[l];
    std::vector<double>& z = (l + 1 == layers.size()) ? out.logits : out.hidden[l];
    z.resize(n * s.fan_out);
    const double* bias = w + s.bias_offset();
    for (std::size_t i = 0; i < n; ++i) std::copy(bias, bias + s.fan_out, z.begin() + i * s.fan_out);
    kernels::gemm(n, s.fan_out, s.fan_in, a, s.fan_in, w + s.offset, s.fan_out, z.data(),
                  s.fan_out);
    if (l + 1 < layers.size()) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    a = z.data();
  }
  return out;
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw ParameterError("parameter vector contains non-finite values");
  }
}

double ParamVector::norm() const { return std::sqrt(kernels::dot(values_, values_)); }

void NetworkSpec::validate() const {
  if (input_dim == 0) throw ParameterError("network input_dim must be positive");
  if (classes == 0) throw ParameterError("network classes must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ParameterError("hidden layer widths must be positive");
  }
}

std::vector<LayerShape> NetworkSpec::layers() const {
  std::vector<LayerShape> out;
  std::size_t fan_in = input_dim;
  std::size_t offset = 0;
  auto push = [&](std::size_t fan_out) {
    out.push_back({fan_in, fan_out, offset});
    offset += (fan_in + 1) * fan_out;
    fan_in = fan_out;
  };
  for (std::size_t h : hidden) push(h);
  push(classes);
  return out;
}

std::size_t NetworkSpec::param_count() const {
  std::size_t n = 0;
  for (const LayerShape& s : layers()) n += (s.fan_in + 1) * s.fan_out;
  return n;
}

Network::Network(NetworkSpec spec, ParamVector params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  layers_ = spec_.layers();
  if (params_.size() != spec_.param_count()) {
    throw DimensionError("parameter vector has " + std::to_string(params_.size()) +
                         " entries, architecture needs " + std::to_string(spec_.param_count()));
  }
}

Network Network::initialized(NetworkSpec spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.param_count());
  RngStream rng = RngStream(seed).split(0x696e6974);  // "init"
  for (const LayerShape& s : spec.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
    const std::size_t end = s.bias_offset() + s.fan_out;
    for (std::size_t i = s.offset; i < end; ++i) params[i] = rng.uniform(-bound, bound);
  }
  return Network(std::move(spec), std::move(params));
}

void Network::load(const ParamVector& params) {
  if (params.size() != params_.size()) {
    throw DimensionError("cannot load " + std::to_string(params.size()) +
                         " parameters into a network of " + std::to_string(params_.size()));
  }
  params_ = params;
}

void Batch::validate(std::size_t input_dim, std::size_t classes) const {
  if (labels.empty()) throw DataError("batch is empty");
  check_inputs(inputs, input_dim);
  check_labels(labels, inputs.rows(), classes);
}

std::size_t PassResult::correct(std::span<const int> labels) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) c += predicted[i] == labels[i];
  return c;
}

PassResult run_pass(const Network& net, const Tensor& inputs, std::span<const int> labels,
                    PassOptions options) {
  const auto& layers = net.layers();
  const std::size_t classes = net.spec().classes;
  check_inputs(inputs, net.spec().input_dim);
  check_labels(labels, inputs.rows(), classes);
  const std::size_t n = inputs.rows();
  if (n == 0) throw DataError("batch is empty");

  Activations acts = propagate(net, inputs);

  PassResult out;
  out.sample_loss.resize(n);
  out.predicted.resize(n);
  // delta rows: softmax - onehot, the gradient of each sample's own loss.
  std::vector<double> delta(n * classes);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = acts.logits.data() + i * classes;
    std::size_t arg = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (z[c] > z[arg]) arg = c;
    }
    const double zmax = z[arg];
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      delta[i * classes + c] = std::exp(z[c] - zmax);
      sum += delta[i * classes + c];
    }
    const auto y = static_cast<std::size_t>(labels[i]);
    out.sample_loss[i] = std::log(sum) + zmax - z[y];
    out.predicted[i] = static_cast<int>(arg);
    total += out.sample_loss[i];
    for (std::size_t c = 0; c < classes; ++c) delta[i * classes + c] /= sum;
    delta[i * classes + y] -= 1.0;
  }
  out.mean_loss = total / static_cast<double>(n);

  if (!options.param_grad && !options.input_grad && !options.sample_grad_norms) return out;

  const double* w = net.params().data();
  if (options.param_grad) out.param_grad = ParamVector(net.params().size());
  std::vector<double> norm2;
  if (options.sample_grad_norms) norm2.assign(n, 0.0);

  std::vector<double> scratch;
  std::vector<double> upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerShape& s = layers[l];
    const double* a = (l == 0) ? inputs.data() : acts.hidden[l - 1].data();

    if (options.param_grad) {
      transpose(a, n, s.fan_in, scratch);
      double* gw = out.param_grad.data() + s.offset;
      kernels::gemm(s.fan_in, s.fan_out, n, scratch.data(), n, delta.data(), s.fan_out, gw,
                    s.fan_out);
      double* gb = out.param_grad.data() + s.bias_offset();
      for (std::size_t i = 0; i < n; ++i) {
        const double* d = delta.data() + i * s.fan_out;
        for (std::size_t j = 0; j < s.fan_out; ++j) gb[j] += d[j];
      }
    }
    if (options.sample_grad_norms) {
      // grad of a rank-one layer term a_i (x) delta_i has norm |a_i| |delta_i|.
      for (std::size_t i = 0; i < n; ++i) {
        const std::span<const double> ai(a + i * s.fan_in, s.fan_in);
        const std::span<const double> di(delta.data() + i * s.fan_out, s.fan_out);
        norm2[i] += (kernels::dot(ai, ai) + 1.0) * kernels::dot(di, di);
      }
    }
    if (l == 0 && !options.input_grad) break;

    transpose(w + s.offset, s.fan_in, s.fan_out, scratch);
    upstream.assign(n * s.fan_in, 0.0);
    kernels::gemm(n, s.fan_in, s.fan_out, delta.data(), s.fan_out, scratch.data(), s.fan_in,
                  upstream.data(), s.fan_in);
    if (l == 0) {
      out.input_grad = Tensor({n, s.fan_in}, std::move(upstream));
      break;
    }
    for (std::size_t k = 0; k < upstream.size(); ++k) {
      if (!(a[k] > 0.0)) upstream[k] = 0.0;
    }
    delta.swap(upstream);
  }

  if (options.param_grad) {
    const auto dn = static_cast<double>(n);
    for (double& g : out.param_grad.values()) g /= dn;
  }
  if (options.sample_grad_norms) {
    out.sample_grad_norm.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.sample_grad_norm[i] = std::sqrt(norm2[i]);
  }
  return out;
}

Tensor forward(const Network& net, const Tensor& inputs) {
  check_inputs(inputs, net.spec().input_dim);
  Activations acts = propagate(net, inputs);
  return Tensor({inputs.rows(), net.spec().classes}, std::move(acts.logits));
}

std::vector<double> sample_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw DimensionError("logits must be a matrix");
  const std::size_t classes = logits.cols();
  check_labels(labels, logits.rows(), classes);
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::span<const double> z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    out[i] = std::log(sum) + zmax - z[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::vector<double> losses = sample_cross_entropy(logits, labels);
  if (losses.empty()) throw DataError("cross entropy of an empty batch");
  double total = 0.0;
  for (double v : losses) total += v;
  return total / static_cast<double>(losses.size());
}

Gradients backward(const Network& net, const Batch& batch) {
  PassResult r = run_pass(net, batch.inputs, batch.labels, {.param_grad = true, .input_grad = true});
  return {r.mean_loss, std::move(r.param_grad), std::move(r.input_grad)};
}

SampleGradNorms per_sample_grad_norms(const Network& net, const Batch& batch) {
  PassResult r = run_pass(net, batch.inputs, batch.labels, {.sample_grad_norms = true});
  SampleGradNorms out{std::move(r.sample_grad_norm), 0.0};
  for (double v : out.norms) out.mean += v;
  out.mean /= static_cast<double>(out.norms.size());
  return out;
}

double batch_grad_norm(const Network& net, const Batch& batch) {
  return run_pass(net, batch.inputs, batch.labels, {.param_grad = true}).param_grad.norm();
}

}  // namespace subat
