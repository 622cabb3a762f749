#include <doctest.h>

#include <cmath>

#include "subat/attacks.hpp"
#include "subat/error.hpp"

using namespace subat;

namespace {

Network identity_linear() {
  // logits = x W + b with W = I, b = 0.
  return Network({2, {}, 2}, ParamVector(std::vector<double>{1, 0, 0, 1, 0, 0}));
}

Batch random_batch(std::size_t n, std::size_t d, std::size_t classes, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> x(n * d);
  for (double& v : x) v = rng.uniform() < 0.2 ? std::round(rng.uniform()) : rng.uniform();
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(classes));
  return {Tensor::matrix(n, d, std::move(x)), std::move(y)};
}

bool in_box(const Tensor& t) {
  for (double v : t.values()) {
    if (v < 0.0 || v > 1.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("fgsm on a linear softmax model") {
  const Network net = identity_linear();
  const Batch batch{Tensor::matrix(1, 2, {0.5, 0.5}), {0}};
  const Tensor adv = fgsm(net, batch, 0.1);
  CHECK(adv.at(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(adv.at(0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(fgsm(net, batch, 0.0) == batch.inputs);
}

TEST_CASE("fgsm clips to the unit box") {
  const Network net = identity_linear();
  // Label 0: gradient sign on x1 is positive, so 0.99 + 0.05 clips to 1.
  const Batch batch{Tensor::matrix(1, 2, {0.5, 0.99}), {0}};
  CHECK(fgsm(net, batch, 0.05).at(0, 1) == 1.0);
  CHECK(fgsm(net, batch, 0.05, false).at(0, 1) == doctest::Approx(1.04));
}

TEST_CASE("fast fgsm: zero radius and default step") {
  const Network net = Network::initialized({6, {5}, 3}, 1);
  const Batch batch = random_batch(9, 6, 3, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(fast_fgsm(net, batch, 0.0, 0.3, RngStream(seed)) == batch.inputs);
  CHECK(fast_alpha(0.08) == doctest::Approx(0.1));
}

TEST_CASE("single-step pgd without init equals fgsm bit for bit") {
  const Network net = Network::initialized({8, {12}, 4}, 3);
  const Batch batch = random_batch(16, 8, 4, 4);
  for (double alpha : {0.1, 0.2, 1.0}) {
    const AttackSpec spec{Norm::kLinf, 0.1, alpha, 1, 1, false, true};
    CHECK(pgd(net, batch, spec, RngStream(7)).inputs == fgsm(net, batch, 0.1));
    CHECK(perturb(net, batch, spec, RngStream(7)) == fgsm(net, batch, 0.1));
  }
}

TEST_CASE("attacks stay inside the ball and the box") {
  const Network net = Network::initialized({10, {16}, 3}, 5);
  RngStream meta(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Batch batch = random_batch(6, 10, 3, 100 + trial);
    AttackSpec spec;
    spec.norm = trial % 2 ? Norm::kL2 : Norm::kLinf;
    spec.epsilon = meta.uniform(0.0, spec.norm == Norm::kL2 ? 1.5 : 0.4);
    spec.alpha = meta.uniform(0.0, 2.0 * spec.epsilon);
    spec.steps = 1 + static_cast<int>(meta.below(5));
    spec.restarts = 1 + static_cast<int>(meta.below(3));
    spec.rand_init = meta.below(2) == 1;
    const AttackResult r = pgd(net, batch, spec, meta.split(trial));
    CHECK(ball_violation(batch.inputs, r.inputs, spec.norm, spec.epsilon) <= 1e-12);
    CHECK(in_box(r.inputs));
  }
}

TEST_CASE("pgd picks the max-loss restart and robustness needs every restart") {
  const Network net = Network::initialized({10, {16}, 3}, 6);
  const Batch batch = random_batch(20, 10, 3, 9);
  AttackSpec spec{Norm::kLinf, 0.2, 0.05, 3, 4, true, true};
  const AttackResult all = pgd(net, batch, spec, RngStream(1));
  const PassResult at_best = run_pass(net, all.inputs, batch.labels, {});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(at_best.sample_loss[i] == doctest::Approx(all.loss[i]).epsilon(1e-14));
    if (all.robust[i]) CHECK(at_best.predicted[i] == batch.labels[i]);
  }
  // More restarts can only lower robust accuracy.
  AttackSpec fewer = spec;
  fewer.restarts = 1;
  const AttackResult first = pgd(net, batch, fewer, RngStream(1));
  std::size_t robust_all = 0, robust_first = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    robust_all += all.robust[i];
    robust_first += first.robust[i];
    if (all.robust[i]) CHECK(first.robust[i]);
  }
  CHECK(robust_all <= robust_first);
}

TEST_CASE("attack draws are per sample, independent of batch composition") {
  const Network net = Network::initialized({5, {7}, 2}, 8);
  const Batch batch = random_batch(4, 5, 2, 10);
  const AttackSpec spec{Norm::kLinf, 0.1, 0.125, 2, 1, true, true};
  const Tensor whole = perturb(net, batch, spec, RngStream(3));
  const Batch head{Tensor::matrix(2, 5, std::vector<double>(batch.inputs.values().begin(), batch.inputs.values().begin() + 10)),
                   {batch.labels[0], batch.labels[1]}};
  const Tensor part = perturb(net, head, spec, RngStream(3));
  for (std::size_t j = 0; j < 10; ++j) CHECK(part.values()[j] == whole.values()[j]);
}

TEST_CASE("attack spec validation") {
  CHECK_THROWS_AS((AttackSpec{Norm::kLinf, -0.1, 0.1}.validate()), ParameterError);
  CHECK_THROWS_AS((AttackSpec{Norm::kLinf, 0.1, 0.1, 0}.validate()), ParameterError);
  CHECK_THROWS_AS((AttackSpec{Norm::kLinf, 0.1, 0.1, 1, 0}.validate()), ParameterError);
  CHECK(parse_norm("l2") == Norm::kL2);
  CHECK_THROWS_AS(parse_norm("l1"), ParameterError);
}
