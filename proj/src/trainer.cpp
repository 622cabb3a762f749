#include "subat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "subat/error.hpp"
#include "subat/kernels.hpp"

namespace subat {

namespace {

// Stream keys; every random draw of a run derives from (seed, key, index).
constexpr std::uint64_t kShuffleKey = 0x5348;
constexpr std::uint64_t kAttackKey = 0x4154;
constexpr std::uint64_t kMonitorKey = 0x4d4f;
constexpr std::uint64_t kEvalKey = 0x4556;
constexpr std::size_t kEvalChunk = 256;

std::size_t steps_per_epoch(std::size_t m, std::size_t batch) { return (m + batch - 1) / batch; }

std::vector<std::size_t> epoch_order(std::size_t m, std::uint64_t seed, std::size_t epoch) {
  return shuffled_indices(m, seed, kShuffleKey * 1000003ULL + epoch);
}

ScheduleSpec resolved_schedule(const TrainConfig& config, std::size_t steps) {
  ScheduleSpec s = config.schedule;
  if (s.kind == ScheduleKind::kCyclic && s.total_steps == 0) s.total_steps = std::max<std::size_t>(1, config.epochs * steps);
  return s;
}

// Snapshot slots within an epoch of S steps: after steps floor(k S / p), k = 1..p.
std::vector<std::size_t> sample_positions(std::size_t steps, std::size_t per_epoch) {
  std::vector<std::size_t> pos;
  for (std::size_t k = 1; k <= per_epoch; ++k) pos.push_back(std::max<std::size_t>(1, k * steps / per_epoch));
  return pos;
}

struct Monitor {
  Batch batch;
};

MetricsRecord measure(const Network& net, const TrainConfig& config, const Dataset& train,
                      const Dataset& val, const Batch& monitor, std::size_t epoch) {
  const RngStream root(config.seed);
  MetricsRecord rec;
  rec.epoch = epoch;
  rec.natural_train_acc = evaluate(net, train, std::nullopt, root).natural;
  const Accuracy v = evaluate(net, val, config.eval_attack, root.split(kEvalKey).split(epoch));
  rec.natural_val_acc = v.natural;
  rec.robust_val_acc = v.robust;

  const Tensor adv = perturb(net, monitor, config.attack, root.split(kMonitorKey).split(epoch));
  const PassResult pass =
      run_pass(net, adv, monitor.labels, {.param_grad = true, .sample_grad_norms = true});
  rec.batch_grad_norm = pass.param_grad.norm();
  double total = 0.0;
  for (double g : pass.sample_grad_norm) total += g;
  rec.avg_sample_grad_norm = total / static_cast<double>(pass.sample_grad_norm.size());
  rec.robust_train_acc =
      static_cast<double>(pass.correct(monitor.labels)) / static_cast<double>(monitor.size());
  return rec;
}

Batch monitor_batch(const TrainConfig& config, const Dataset& train) {
  const std::vector<std::size_t> order = epoch_order(train.size(), config.seed, 0);
  return train.gather(std::span<const std::size_t>(order).first(config.monitor_batch_size));
}

// Shared epoch loop. `apply` performs the parameter update from the mean
// adversarial gradient; `after_step` sees (epoch, step in epoch, global step).
template <class Apply, class AfterStep, class AfterEpoch>
void run_epochs(Network& net, const TrainConfig& config, const Dataset& train, const Dataset& val,
                const Batch& monitor, std::vector<MetricsRecord>& metrics,
                std::vector<double>& seconds, Apply&& apply, AfterStep&& after_step,
                AfterEpoch&& after_epoch) {
  const std::size_t m = train.size();
  const std::size_t steps = steps_per_epoch(m, config.batch_size);
  const ScheduleSpec schedule = resolved_schedule(config, steps);
  const RngStream attack_root = RngStream(config.seed).split(kAttackKey);
  std::size_t global = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(m, config.seed, epoch);
    const std::span<const std::size_t> all(order);
    std::size_t correct = 0;
    double lr = 0.0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t lo = s * config.batch_size;
      const std::size_t hi = std::min(m, lo + config.batch_size);
      const Batch batch = train.gather(all.subspan(lo, hi - lo));
      const Tensor adv = perturb(net, batch, config.attack, attack_root.split(global));
      PassResult pass = run_pass(net, adv, batch.labels, {.param_grad = true});
      correct += pass.correct(batch.labels);
      lr = lr_at(schedule, epoch, global);
      apply(pass.param_grad, lr);
      ++global;
      after_step(epoch, s + 1, global);
    }
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

    MetricsRecord rec = measure(net, config, train, val, monitor, epoch + 1);
    rec.step = global;
    rec.lr = lr;
    rec.robust_train_acc = static_cast<double>(correct) / static_cast<double>(m);
    metrics.push_back(rec);
    after_epoch(epoch + 1);
  }
}

void check_data(const Dataset& train, const Dataset& val, const NetworkSpec& arch) {
  if (train.size() == 0) throw DataError("training set is empty");
  if (val.size() == 0) throw DataError("validation set is empty");
  if (train.dim() != arch.input_dim || val.dim() != arch.input_dim) {
    throw DimensionError("data dimension does not match the network input");
  }
  if (train.classes > arch.classes || val.classes > arch.classes) {
    throw DimensionError("data has more classes than the network outputs");
  }
}

}  // namespace

void ScheduleSpec::validate() const {
  if (!(base_lr > 0.0)) throw ParameterError("schedule base_lr must be positive");
  if (kind == ScheduleKind::kPiecewise) {
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ParameterError("decay factor must lie in (0, 1]");
    for (std::size_t i = 1; i < milestones.size(); ++i) {
      if (milestones[i] <= milestones[i - 1]) throw ParameterError("milestones must be strictly increasing");
    }
  }
}

double lr_at(const ScheduleSpec& schedule, std::size_t epoch, std::size_t step) {
  switch (schedule.kind) {
    case ScheduleKind::kConstant:
      return schedule.base_lr;
    case ScheduleKind::kPiecewise: {
      double lr = schedule.base_lr;
      for (std::size_t m : schedule.milestones) {
        if (epoch >= m) lr *= schedule.decay_factor;
      }
      return lr;
    }
    case ScheduleKind::kCyclic: {
      const double total = static_cast<double>(std::max<std::size_t>(1, schedule.total_steps));
      const double half = total / 2.0;
      const double s = std::min(static_cast<double>(step), total);
      return s <= half ? schedule.base_lr * s / half : schedule.base_lr * (total - s) / half;
    }
  }
  return schedule.base_lr;
}

void TrainConfig::validate(std::size_t train_size) const {
  if (train_size == 0) throw DataError("training set is empty");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (monitor_batch_size == 0 || monitor_batch_size > train_size) {
    throw ParameterError("monitor batch size must lie in [1, " + std::to_string(train_size) + "]");
  }
  if (sampling.per_epoch == 0) throw ParameterError("sampling per_epoch must be positive");
  if (!(momentum >= 0.0) || !(weight_decay >= 0.0)) throw ParameterError("momentum and weight decay must be >= 0");
  schedule.validate();
  attack.validate();
  eval_attack.validate();
}

Accuracy evaluate(const Network& net, const Dataset& data, const std::optional<AttackSpec>& attack,
                  const RngStream& rng) {
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  std::size_t natural = 0;
  std::size_t robust = 0;
  for (std::size_t lo = 0, chunk = 0; lo < data.size(); lo += kEvalChunk, ++chunk) {
    const std::size_t hi = std::min(data.size(), lo + kEvalChunk);
    std::vector<std::size_t> rows(hi - lo);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = lo + i;
    const Batch batch = data.gather(rows);
    const PassResult clean = run_pass(net, batch.inputs, batch.labels, {});
    const std::size_t c = clean.correct(batch.labels);
    natural += c;
    if (!attack) {
      robust += c;
      continue;
    }
    const AttackResult adv = pgd(net, batch, *attack, rng.split(chunk));
    for (unsigned char r : adv.robust) robust += r;
  }
  const auto m = static_cast<double>(data.size());
  return {static_cast<double>(natural) / m, static_cast<double>(robust) / m};
}

AtResult train_at(const NetworkSpec& arch, const TrainConfig& config, const Dataset& train,
                  const Dataset& val, const EpochObserver& observer) {
  check_data(train, val, arch);
  config.validate(train.size());
  Network net = Network::initialized(arch, config.seed);
  AtResult out;
  out.trajectory.append(net.params(), {0, 0});
  if (observer) observer(0, net.params());

  const Batch monitor = monitor_batch(config, train);
  const std::size_t steps = steps_per_epoch(train.size(), config.batch_size);
  const std::vector<std::size_t> positions = sample_positions(steps, config.sampling.per_epoch);
  bool sampling = config.sampling.epochs > 0;

  std::vector<double> velocity(net.params().size(), 0.0);
  auto apply = [&](ParamVector& grad, double lr) {
    std::span<double> w = net.params().values();
    std::span<const double> g = grad.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + config.weight_decay * w[i];
      velocity[i] = config.momentum * velocity[i] + gi;
      w[i] -= lr * velocity[i];
    }
  };
  auto after_step = [&](std::size_t epoch, std::size_t step_in_epoch, std::size_t global) {
    if (!sampling || epoch >= config.sampling.epochs) return;
    for (std::size_t p : positions) {
      if (p == step_in_epoch) {
        out.trajectory.append(net.params(), {static_cast<std::uint32_t>(epoch + 1),
                                             static_cast<std::uint32_t>(global)});
      }
    }
  };
  auto after_epoch = [&](std::size_t epoch) {
    if (sampling && config.sampling.truncate_on_collapse) {
      const auto event = detect_catastrophic(out.metrics);
      if (event && *event == epoch) {
        std::size_t keep = 0;
        while (keep < out.trajectory.size() && out.trajectory.meta(keep).epoch < epoch) ++keep;
        out.trajectory.truncate(keep);
        sampling = false;
      }
    }
    if (observer) observer(epoch, net.params());
  };

  run_epochs(net, config, train, val, monitor, out.metrics, out.epoch_train_seconds, apply,
             after_step, after_epoch);
  out.final_params = net.params();
  return out;
}

SubAtResult train_sub_at(const NetworkSpec& arch, const SubspaceBasis& basis,
                         const Trajectory& trajectory, const TrainConfig& config,
                         const Dataset& train, const Dataset& val, const EpochObserver& observer) {
  check_data(train, val, arch);
  config.validate(train.size());
  if (trajectory.size() == 0) throw ParameterError("trajectory is empty");
  if (basis.dim() != trajectory.dim()) {
    throw DimensionError("basis lives in R^" + std::to_string(basis.dim()) + ", trajectory in R^" +
                         std::to_string(trajectory.dim()));
  }
  if (basis.dim() != arch.param_count()) {
    throw DimensionError("basis dimension does not match the network parameter count");
  }
  basis.validate();

  Network net(arch, trajectory.snapshot(0));
  if (observer) observer(0, net.params());
  const Batch monitor = monitor_batch(config, train);

  SubAtResult out;
  out.entry = measure(net, config, train, val, monitor, 0);
  out.entry.lr = lr_at(config.schedule, 0, 0);

  auto apply = [&](ParamVector& grad, double lr) {
    const ParamVector step = project(basis, grad);
    kernels::axpy(-lr, step.values(), net.params().values());
  };
  auto after_step = [](std::size_t, std::size_t, std::size_t) {};
  auto after_epoch = [&](std::size_t epoch) {
    if (observer) observer(epoch, net.params());
  };
  run_epochs(net, config, train, val, monitor, out.metrics, out.epoch_train_seconds, apply,
             after_step, after_epoch);
  out.final_params = net.params();
  return out;
}

FinalSummary aggregate_final(std::span<const MetricsRecord> metrics) {
  if (metrics.empty()) throw ParameterError("aggregate_final: no metrics records");
  FinalSummary out;
  out.best = metrics.front().robust_val_acc;
  out.best_epoch = metrics.front().epoch;
  for (const MetricsRecord& r : metrics) {
    if (r.robust_val_acc > out.best) {
      out.best = r.robust_val_acc;
      out.best_epoch = r.epoch;
    }
  }
  const std::size_t tail = std::min<std::size_t>(5, metrics.size());
  double total = 0.0;
  for (std::size_t i = metrics.size() - tail; i < metrics.size(); ++i) total += metrics[i].robust_val_acc;
  out.final = total / static_cast<double>(tail);
  out.gap = out.best - out.final;
  return out;
}

std::optional<std::size_t> detect_catastrophic(std::span<const MetricsRecord> metrics,
                                               double drop_ratio, std::size_t window) {
  double running_max = 0.0;
  for (std::size_t e = 0; e < metrics.size(); ++e) {
    const double acc = metrics[e].robust_val_acc;
    if (e > 0 && acc < drop_ratio * running_max) {
      const std::size_t from = e >= window ? e - window : 0;
      for (std::size_t j = from; j < e; ++j) {
        if (metrics[j].robust_val_acc >= running_max / 2.0) return metrics[e].epoch;
      }
    }
    running_max = std::max(running_max, acc);
  }
  return std::nullopt;
}

}  // namespace subat
