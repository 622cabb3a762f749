#include "subat/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "subat/error.hpp"

namespace subat {

namespace {

double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

double clip_unit(double v) { return std::clamp(v, 0.0, 1.0); }

double row_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void init_row(const AttackSpec& spec, std::span<const double> x, std::span<double> adv,
              RngStream stream) {
  const std::size_t dim = x.size();
  if (spec.norm == Norm::kLinf) {
    for (std::size_t j = 0; j < dim; ++j) adv[j] = x[j] + stream.uniform(-spec.epsilon, spec.epsilon);
  } else {
    // Uniform in the ball: Gaussian direction, radius eps * u^(1/D).
    std::vector<double> dir(dim);
    for (double& v : dir) v = stream.normal();
    const double len = std::max(row_norm(dir), 1e-300);
    const double radius = spec.epsilon * std::pow(stream.uniform(), 1.0 / static_cast<double>(dim));
    for (std::size_t j = 0; j < dim; ++j) adv[j] = x[j] + dir[j] / len * radius;
  }
  if (spec.clip_box) {
    for (double& v : adv) v = clip_unit(v);
  }
}

void step_row(const AttackSpec& spec, std::span<const double> x, std::span<double> adv,
              std::span<const double> grad) {
  const std::size_t dim = x.size();
  if (spec.norm == Norm::kLinf) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = std::clamp(adv[j] - x[j] + spec.alpha * sgn(grad[j]), -spec.epsilon,
                                  spec.epsilon);
      adv[j] = x[j] + d;
    }
  } else {
    const double scale = spec.alpha / std::max(row_norm(grad), 1e-12);
    std::vector<double> d(dim);
    for (std::size_t j = 0; j < dim; ++j) d[j] = adv[j] - x[j] + scale * grad[j];
    const double len = row_norm(d);
    const double shrink = len > spec.epsilon ? spec.epsilon / len : 1.0;
    for (std::size_t j = 0; j < dim; ++j) adv[j] = x[j] + d[j] * shrink;
  }
  if (spec.clip_box) {
    for (double& v : adv) v = clip_unit(v);
  }
}

Tensor run_restart(const Network& net, const Batch& batch, const AttackSpec& spec,
                   const RngStream& stream) {
  Tensor adv = batch.inputs;
  const std::size_t n = batch.size();
  if (spec.rand_init) {
    for (std::size_t i = 0; i < n; ++i) init_row(spec, batch.inputs.row(i), adv.row(i), stream.split(i));
  }
  for (int s = 0; s < spec.steps; ++s) {
    const PassResult pass = run_pass(net, adv, batch.labels, {.input_grad = true});
    for (std::size_t i = 0; i < n; ++i) {
      step_row(spec, batch.inputs.row(i), adv.row(i), pass.input_grad.row(i));
    }
  }
  return adv;
}

void check_batch(const Network& net, const Batch& batch) {
  batch.validate(net.spec().input_dim, net.spec().classes);
}

}  // namespace

Norm parse_norm(std::string_view name) {
  if (name == "linf" || name == "Linf" || name == "inf") return Norm::kLinf;
  if (name == "l2" || name == "L2") return Norm::kL2;
  throw ParameterError("unknown norm '" + std::string(name) + "'");
}

std::string_view norm_name(Norm norm) { return norm == Norm::kLinf ? "linf" : "l2"; }

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ParameterError("attack epsilon must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("attack alpha must be >= 0");
  if (steps < 1) throw ParameterError("attack steps must be >= 1");
  if (restarts < 1) throw ParameterError("attack restarts must be >= 1");
}

Tensor fgsm(const Network& net, const Batch& batch, double epsilon, bool clip_box) {
  if (!(epsilon >= 0.0)) throw ParameterError("fgsm epsilon must be >= 0");
  check_batch(net, batch);
  const PassResult pass = run_pass(net, batch.inputs, batch.labels, {.input_grad = true});
  Tensor adv = batch.inputs;
  std::span<double> out = adv.values();
  std::span<const double> g = pass.input_grad.values();
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = out[k] + epsilon * sgn(g[k]);
    if (clip_box) out[k] = clip_unit(out[k]);
  }
  return adv;
}

Tensor fast_fgsm(const Network& net, const Batch& batch, double epsilon, double alpha,
                 const RngStream& rng, bool clip_box) {
  const AttackSpec spec{Norm::kLinf, epsilon, alpha, 1, 1, true, clip_box};
  spec.validate();
  check_batch(net, batch);
  return run_restart(net, batch, spec, rng.split(0));
}

AttackResult pgd(const Network& net, const Batch& batch, const AttackSpec& spec,
                 const RngStream& rng) {
  spec.validate();
  check_batch(net, batch);
  const std::size_t n = batch.size();
  const std::size_t dim = batch.inputs.cols();
  AttackResult out{batch.inputs, std::vector<double>(n), std::vector<unsigned char>(n, 1)};
  for (int r = 0; r < spec.restarts; ++r) {
    const Tensor adv = run_restart(net, batch, spec, rng.split(static_cast<std::uint64_t>(r)));
    const PassResult pass = run_pass(net, adv, batch.labels, {});
    for (std::size_t i = 0; i < n; ++i) {
      if (pass.predicted[i] != batch.labels[i]) out.robust[i] = 0;
      if (r == 0 || pass.sample_loss[i] > out.loss[i]) {
        out.loss[i] = pass.sample_loss[i];
        std::copy_n(adv.row(i).begin(), dim, out.inputs.row(i).begin());
      }
    }
  }
  return out;
}

Tensor perturb(const Network& net, const Batch& batch, const AttackSpec& spec,
               const RngStream& rng) {
  if (spec.restarts > 1) return pgd(net, batch, spec, rng).inputs;
  spec.validate();
  check_batch(net, batch);
  return run_restart(net, batch, spec, rng.split(0));
}

double ball_violation(const Tensor& clean, const Tensor& adv, Norm norm, double epsilon) {
  if (clean.shape() != adv.shape()) throw DimensionError("ball_violation: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < clean.rows(); ++i) {
    const auto x = clean.row(i);
    const auto y = adv.row(i);
    double size = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = y[j] - x[j];
      size = norm == Norm::kLinf ? std::max(size, std::abs(d)) : size + d * d;
    }
    if (norm == Norm::kL2) size = std::sqrt(size);
    worst = std::max(worst, size - epsilon);
  }
  return worst;
}

}  // namespace subat
