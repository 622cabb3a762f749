#include "subat/pipeline.hpp"

#include <algorithm>

#include "subat/error.hpp"

namespace subat {

namespace {

int to_int(const Config& c, const std::string& key, int fallback) {
  const std::uint64_t v = c.u64(key, static_cast<std::uint64_t>(fallback));
  if (v == 0 || v > 1'000'000) throw ConfigError(key, "must lie in [1, 1000000]");
  return static_cast<int>(v);
}

ScheduleSpec schedule_from(const Config& c, const std::string& prefix, double lr, std::size_t epochs,
                           const std::string& fallback_kind) {
  const std::string kind = c.string(prefix + ".schedule", fallback_kind);
  ScheduleSpec s;
  if (kind == "constant") {
    s = ScheduleSpec::constant(lr);
  } else if (kind == "piecewise") {
    s = ScheduleSpec::piecewise(lr, c.size_list(prefix + ".milestones", {epochs / 2, epochs * 3 / 4}),
                                c.real(prefix + ".decay", 0.1));
    // Milestones that coincide on short runs collapse to one drop each.
    s.milestones.erase(std::unique(s.milestones.begin(), s.milestones.end()), s.milestones.end());
  } else if (kind == "cyclic") {
    s = ScheduleSpec::cyclic(lr, 0);
  } else {
    throw ConfigError(prefix + ".schedule", "expected constant, piecewise or cyclic, got '" + kind + "'");
  }
  try {
    s.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(prefix + ".schedule", e.what());
  }
  return s;
}

Dataset load_data(const Config& c, std::uint64_t seed) {
  const std::string kind = c.string("data.kind");
  if (kind == "synthetic") {
    SyntheticSpec s;
    s.classes = c.u64("data.classes", s.classes);
    s.dim = c.u64("data.dim", s.dim);
    s.per_class = c.u64("data.per_class", s.per_class);
    s.margin = c.real("data.margin", s.margin);
    s.noise = c.real("data.noise", s.noise);
    s.seed = seed;
    if (s.classes < 2) throw ConfigError("data.classes", "need at least 2 classes");
    if (s.dim < 2) throw ConfigError("data.dim", "need at least 2 input dimensions");
    if (s.per_class == 0) throw ConfigError("data.per_class", "must be positive");
    return gen_synthetic(s);
  }
  if (kind == "csv") return load_csv(c.string("data.csv_path"));
  throw ConfigError("data.kind", "expected synthetic or csv, got '" + kind + "'");
}

}  // namespace

AttackSpec attack_from(const Config& c, const std::string& prefix) {
  AttackSpec a;
  a.norm = Norm::kLinf;
  if (c.has(prefix + ".norm")) {
    try {
      a.norm = parse_norm(c.string(prefix + ".norm"));
    } catch (const ParameterError& e) {
      throw ConfigError(prefix + ".norm", e.what());
    }
  }
  a.epsilon = c.real(prefix + ".eps");
  a.steps = to_int(c, prefix + ".steps", 1);
  a.restarts = to_int(c, prefix + ".restarts", 1);
  a.rand_init = c.boolean(prefix + ".rand_init", true);
  a.alpha = c.real(prefix + ".alpha", a.steps == 1 ? fast_alpha(a.epsilon) : a.epsilon / 4.0);
  try {
    a.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(prefix + ".eps", e.what());
  }
  return a;
}

RunPlan build_plan(const Config& c, std::optional<std::uint64_t> seed_override) {
  RunPlan plan;
  plan.seed = seed_override ? *seed_override : c.u64("seed");
  const AttackSpec attack = attack_from(c, "attack");

  const Dataset data = load_data(c, plan.seed);
  const double ratio = c.real("data.split", 0.9);
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("data.split", "must lie in (0, 1)");
  std::tie(plan.train, plan.val) = split(data, ratio, plan.seed);

  plan.arch.input_dim = plan.train.dim();
  plan.arch.hidden = c.size_list("model.hidden", {256, 256});
  plan.arch.classes = std::max<std::size_t>(plan.train.classes, plan.val.classes);
  try {
    plan.arch.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("model.hidden", e.what());
  }

  // Robust validation defaults to PGD-20 at the training radius.
  AttackSpec eval;
  eval.norm = attack.norm;
  eval.epsilon = c.real("eval.eps", attack.epsilon);
  eval.steps = to_int(c, "eval.steps", 20);
  eval.restarts = to_int(c, "eval.restarts", 1);
  eval.alpha = c.real("eval.alpha", eval.epsilon / 4.0);
  eval.rand_init = true;
  try {
    eval.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("eval.eps", e.what());
  }

  TrainConfig& at = plan.at;
  at.seed = plan.seed;
  at.epochs = c.u64("train.epochs", 30);
  at.batch_size = c.u64("train.batch_size", 128);
  if (at.batch_size == 0) throw ConfigError("train.batch_size", "must be positive");
  at.schedule = schedule_from(c, "train", c.real("train.lr", 0.1), at.epochs, "piecewise");
  at.attack = attack;
  at.eval_attack = eval;
  at.momentum = c.real("train.momentum", 0.9);
  at.weight_decay = c.real("train.weight_decay", 5e-4);
  at.sampling.per_epoch = c.u64("sample.per_epoch", 2);
  at.sampling.epochs = c.u64("sample.epochs", at.epochs);
  at.sampling.truncate_on_collapse = c.boolean("sample.truncate", false);
  if (at.sampling.per_epoch == 0) throw ConfigError("sample.per_epoch", "must be positive");
  at.monitor_batch_size = c.u64("monitor.batch_size", std::min<std::size_t>(256, plan.train.size()));
  if (at.monitor_batch_size == 0 || at.monitor_batch_size > plan.train.size()) {
    throw ConfigError("monitor.batch_size", "must lie in [1, training-set size]");
  }

  TrainConfig& sub = plan.sub;
  sub = at;
  sub.epochs = c.u64("sub.epochs", 40);
  sub.batch_size = c.u64("sub.batch_size", at.batch_size);
  if (sub.batch_size == 0) throw ConfigError("sub.batch_size", "must be positive");
  sub.schedule = schedule_from(c, "sub", c.real("sub.lr", 1.0), sub.epochs, "constant");
  // The subspace stage takes its own step size; it does not inherit attack.alpha.
  sub.attack.epsilon = c.real("sub.eps", attack.epsilon);
  sub.attack.alpha = c.real("sub.alpha", attack.steps == 1 ? fast_alpha(sub.attack.epsilon) : sub.attack.epsilon / 4.0);
  try {
    sub.attack.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("sub.eps", e.what());
  }
  sub.momentum = 0.0;
  sub.weight_decay = 0.0;
  sub.sampling = {};
  plan.sub_dim = c.u64("sub.dim", attack.steps == 1 ? 80 : 120);
  if (plan.sub_dim == 0) throw ConfigError("sub.dim", "must be positive");
  return plan;
}

}  // namespace subat
