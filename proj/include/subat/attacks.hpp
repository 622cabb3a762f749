#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "subat/netcore.hpp"
#include "subat/rng.hpp"
#include "subat/tensor.hpp"

namespace subat {

enum class Norm { kLinf, kL2 };

Norm parse_norm(std::string_view name);
std::string_view norm_name(Norm norm);

struct AttackSpec {
  Norm norm = Norm::kLinf;
  double epsilon = 0.0;
  double alpha = 0.0;
  int steps = 1;
  int restarts = 1;
  bool rand_init = true;
  bool clip_box = true;  // keep x + delta inside [0, 1]^D after every step

  void validate() const;
};

// Step size used by single-step training with random init.
constexpr double fast_alpha(double epsilon) { return 1.25 * epsilon; }

struct AttackResult {
  Tensor inputs;                   // per sample: the restart with maximum loss
  std::vector<double> loss;        // loss at the returned inputs
  std::vector<unsigned char> robust;  // 1 if classified correctly under every restart
};

// x_adv = clip_[0,1](x + epsilon * sgn(grad_x L)), sgn(0) = 0.
Tensor fgsm(const Network& net, const Batch& batch, double epsilon, bool clip_box = true);

// Random start delta0 ~ U[-eps, eps]^D, then one sign step of size alpha
// projected back onto the eps-ball.
Tensor fast_fgsm(const Network& net, const Batch& batch, double epsilon, double alpha,
                 const RngStream& rng, bool clip_box = true);

// Multi-step projected attack with restarts. Draws for sample i, restart r
// come from rng.split(r).split(i), independent of batch composition.
AttackResult pgd(const Network& net, const Batch& batch, const AttackSpec& spec,
                 const RngStream& rng);

// Same iterate as pgd() but skips restart bookkeeping when restarts == 1.
Tensor perturb(const Network& net, const Batch& batch, const AttackSpec& spec,
               const RngStream& rng);

// Largest violation of the spec's ball constraint over all rows of adv - x.
double ball_violation(const Tensor& clean, const Tensor& adv, Norm norm, double epsilon);

}  // namespace subat
