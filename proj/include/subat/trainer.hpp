#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "subat/attacks.hpp"
#include "subat/data.hpp"
#include "subat/netcore.hpp"
#include "subat/subspace.hpp"

namespace subat {

enum class ScheduleKind { kPiecewise, kCyclic, kConstant };

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kConstant;
  double base_lr = 0.1;
  std::vector<std::size_t> milestones;  // piecewise: epochs at which lr *= decay_factor
  double decay_factor = 0.1;
  std::size_t total_steps = 0;  // cyclic; 0 lets the trainer fill in epochs x steps/epoch

  void validate() const;

  static ScheduleSpec constant(double lr) { return {ScheduleKind::kConstant, lr, {}, 1.0, 0}; }
  static ScheduleSpec piecewise(double lr, std::vector<std::size_t> milestones, double factor) {
    return {ScheduleKind::kPiecewise, lr, std::move(milestones), factor, 0};
  }
  static ScheduleSpec cyclic(double lr, std::size_t total_steps) {
    return {ScheduleKind::kCyclic, lr, {}, 1.0, total_steps};
  }
};

// `epoch` is the zero-based epoch index; `step` the zero-based global step.
// Piecewise drops once epoch reaches each milestone (lr(99) = base,
// lr(100) = base * factor for milestone 100). Cyclic is a symmetric triangle
// over total_steps peaking at total_steps / 2.
double lr_at(const ScheduleSpec& schedule, std::size_t epoch, std::size_t step);

struct SamplingSpec {
  std::size_t per_epoch = 2;
  std::size_t epochs = 0;  // sample during the first `epochs` epochs
  // Stop sampling when a catastrophic drop is detected and discard the
  // snapshots of the collapse epoch.
  bool truncate_on_collapse = false;
};

struct TrainConfig {
  std::size_t epochs = 0;
  std::size_t batch_size = 128;
  ScheduleSpec schedule;
  AttackSpec attack;       // training attack
  AttackSpec eval_attack;  // robust validation accuracy
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  SamplingSpec sampling;
  std::size_t monitor_batch_size = 256;

  void validate(std::size_t train_size) const;
};

struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based epoch just completed
  std::size_t step = 0;   // global steps taken so far
  double lr = 0.0;        // learning rate of the epoch's last step
  double natural_train_acc = 0.0;
  double natural_val_acc = 0.0;
  double robust_train_acc = 0.0;  // accuracy on the epoch's training adversarial examples
  double robust_val_acc = 0.0;
  double batch_grad_norm = 0.0;
  double avg_sample_grad_norm = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

// Called with (completed epochs, parameters) at the start (0) and after
// every epoch.
using EpochObserver = std::function<void(std::size_t, const ParamVector&)>;

struct AtResult {
  Trajectory trajectory;
  std::vector<MetricsRecord> metrics;
  ParamVector final_params;
  std::vector<double> epoch_train_seconds;  // optimizer loop only, excludes evaluation
};

AtResult train_at(const NetworkSpec& arch, const TrainConfig& config, const Dataset& train,
                  const Dataset& val, const EpochObserver& observer = {});

struct SubAtResult {
  ParamVector final_params;
  std::vector<MetricsRecord> metrics;
  MetricsRecord entry;  // measured at the rewound initialization, before any step
  std::vector<double> epoch_train_seconds;
};

// Rewinds to trajectory snapshot 0 and runs plain projected SGD
// w <- w - lr P (P^T g); momentum and weight decay in `config` are ignored.
SubAtResult train_sub_at(const NetworkSpec& arch, const SubspaceBasis& basis,
                         const Trajectory& trajectory, const TrainConfig& config,
                         const Dataset& train, const Dataset& val,
                         const EpochObserver& observer = {});

struct Accuracy {
  double natural = 0.0;
  double robust = 0.0;
};

// Robust accuracy counts a sample only if it is classified correctly under
// every restart; with no attack it equals natural accuracy.
Accuracy evaluate(const Network& net, const Dataset& data, const std::optional<AttackSpec>& attack,
                  const RngStream& rng);

struct FinalSummary {
  double best = 0.0;
  std::size_t best_epoch = 0;
  double final = 0.0;  // mean robust_val_acc of the last five epochs
  double gap = 0.0;    // best - final
};

FinalSummary aggregate_final(std::span<const MetricsRecord> metrics);

// First epoch whose robust_val_acc falls below drop_ratio x the running max
// while some epoch within `window` before it was still at >= half the max.
std::optional<std::size_t> detect_catastrophic(std::span<const MetricsRecord> metrics,
                                               double drop_ratio = 0.1, std::size_t window = 1);

}  // namespace subat
