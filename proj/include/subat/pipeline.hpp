#pragma once

// Turns a parsed Config into concrete training plans.

#include <cstddef>
#include <cstdint>
#include <optional>

#include "subat/config.hpp"
#include "subat/data.hpp"
#include "subat/netcore.hpp"
#include "subat/trainer.hpp"

namespace subat {

struct RunPlan {
  std::uint64_t seed = 0;
  NetworkSpec arch;
  Dataset train;
  Dataset val;
  TrainConfig at;   // full-space adversarial training with sampling
  TrainConfig sub;  // subspace stage: constant lr, plain projected SGD
  std::size_t sub_dim = 0;
};

// Loads or generates the data as well. `seed_override` replaces `seed`.
RunPlan build_plan(const Config& config, std::optional<std::uint64_t> seed_override = std::nullopt);

// Attack from `prefix`.{norm,eps,alpha,steps,restarts,rand_init}; without an
// explicit alpha single-step attacks use 1.25 eps and iterative ones eps / 4.
AttackSpec attack_from(const Config& config, const std::string& prefix);

}  // namespace subat
