// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.
//
// Usage: acceptance <recipe.cfg> [scratch-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "oracles.hpp"
#include "subat/attacks.hpp"
#include "subat/config.hpp"
#include "subat/error.hpp"
#include "subat/io.hpp"
#include "subat/kernels.hpp"
#include "subat/pipeline.hpp"
#include "subat/subspace.hpp"
#include "subat/trainer.hpp"

using namespace subat;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;
std::map<int, std::string> lines;  // printed in criterion order at the end

void report(int id, const char* name, const Verdict& v) {
  char head[128];
  std::snprintf(head, sizeof head, "%s criterion %d (%s): ", v.pass ? "PASS" : "FAIL", id, name);
  lines[id] = head + v.detail;
  if (!v.pass) ++failures;
}

int finish() {
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Runs `body`, converting escaped exceptions into a failing verdict.
void criterion(int id, const char* name, const std::function<Verdict()>& body) {
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  report(id, name, v);
}

// ---------------------------------------------------------------------------
// 1: analytic gradients against central differences.

Verdict gradient_exactness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  RngStream meta(2024);
  for (int trial = 0; trial < 10; ++trial) {
    NetworkSpec spec;
    spec.input_dim = 3 + meta.below(6);
    spec.hidden = {4 + meta.below(20)};
    spec.classes = 2 + meta.below(4);
    while (spec.param_count() > 500) --spec.hidden[0];
    const Network net = Network::initialized(spec, 500 + trial);
    const std::size_t n = 2 + meta.below(5);
    std::vector<double> x(n * spec.input_dim);
    for (double& v : x) v = meta.uniform();
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(meta.below(spec.classes));
    const Batch batch{Tensor::matrix(n, spec.input_dim, x), y};
    const Gradients g = backward(net, batch);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back(batch.inputs.row(i).begin(), batch.inputs.row(i).end());
    const std::vector<double> w(net.params().values().begin(), net.params().values().end());
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); };
    const auto fd = oracle::central_diff([&](const std::vector<double>& p) { return oracle::loss(spec, p, rows, y); }, w, 1e-5);
    for (std::size_t i = 0; i < w.size(); ++i) worst = std::max(worst, rel(g.param_grad[i], fd[i]));
    for (std::size_t s = 0; s < n; ++s) {
      const auto fdx = oracle::central_diff(
          [&](const std::vector<double>& xi) { return oracle::loss(spec, w, {xi}, {y[s]}); }, rows[s], 1e-5);
      for (std::size_t j = 0; j < spec.input_dim; ++j) worst = std::max(worst, rel(g.input_grad.at(s, j), fdx[j]));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0, "max relative error " + fmt("%.3g", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2: Gram-route basis against a dense SVD.

Verdict dldr_oracle() {
  const auto t0 = Clock::now();
  double worst_angle = 0.0, worst_sigma = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Trajectory traj = oracle::random_trajectory(64, 12, 9000 + s);
    const SubspaceBasis b = extract_subspace(traj, 5);
    const oracle::Svd ref = oracle::top_svd(traj, 5);
    worst_angle = std::max(worst_angle, oracle::max_principal_angle(ref.u, oracle::basis_matrix(b)));
    for (std::size_t i = 0; i < 5; ++i) {
      worst_sigma = std::max(worst_sigma, std::abs(b.sigma[i] - ref.sigma(static_cast<Eigen::Index>(i))) / ref.sigma(0));
    }
  }
  Trajectory two;
  two.append(ParamVector(std::vector<double>{1, 0}), {});
  two.append(ParamVector(std::vector<double>{-1, 0}), {});
  const SubspaceBasis hand = extract_subspace(two, 1);
  const bool hand_ok = std::abs(hand.columns[0][0] - 1.0) < 1e-15 && std::abs(hand.columns[0][1]) < 1e-15 &&
                       std::abs(hand.sigma[0] - std::sqrt(2.0)) < 1e-15;
  const double secs = seconds_since(t0);
  return {worst_angle < 1e-8 && worst_sigma < 1e-10 && hand_ok && secs < 5.0,
          "max principal angle " + fmt("%.3g", worst_angle) + ", sigma rel error " + fmt("%.3g", worst_sigma) +
              ", 2x2 case " + (hand_ok ? "exact" : "wrong") + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 3: basis and projection properties.

double inner(const ParamVector& a, const ParamVector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Verdict basis_properties() {
  const auto t0 = Clock::now();
  double ortho = 0, idem = 0, sym = 0, expand = 0, sigma_rel = 0, angle = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Trajectory traj = oracle::random_trajectory(200, 15, 7000 + s);
    const SubspaceBasis b = extract_subspace(traj, 8);
    ortho = std::max(ortho, orthonormality_error(b));
    for (std::uint64_t k = 0; k < 5; ++k) {
      const ParamVector g = oracle::random_trajectory(200, 1, 100 * s + k).snapshot(0);
      const ParamVector h = oracle::random_trajectory(200, 1, 100 * s + k + 50).snapshot(0);
      const ParamVector pg = project(b, g), ppg = project(b, pg);
      for (std::size_t i = 0; i < 200; ++i) idem = std::max(idem, std::abs(ppg[i] - pg[i]));
      sym = std::max(sym, std::abs(inner(pg, h) - inner(g, project(b, h))));
      expand = std::max(expand, pg.norm() - g.norm());
    }
    const double c = 3.5;
    Trajectory scaled;
    for (std::size_t j = 0; j < traj.size(); ++j) {
      ParamVector v = traj.snapshot(j);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = b.mean[i] + c * (v[i] - b.mean[i]);
      scaled.append(v, {});
    }
    const SubspaceBasis sb = extract_subspace(scaled, 8);
    for (std::size_t i = 0; i < 8; ++i) sigma_rel = std::max(sigma_rel, std::abs(sb.sigma[i] - c * b.sigma[i]) / (c * b.sigma[i]));
    angle = std::max(angle, oracle::max_principal_angle(oracle::basis_matrix(b), oracle::basis_matrix(sb)));
  }
  const double secs = seconds_since(t0);
  const bool ok = ortho < 1e-8 && idem < 1e-10 && sym < 1e-10 && expand <= 1e-10 && sigma_rel < 1e-9 && angle < 1e-8 && secs < 5.0;
  return {ok, "|P^T P - I| " + fmt("%.2g", ortho) + ", idempotence " + fmt("%.2g", idem) + ", symmetry " +
                  fmt("%.2g", sym) + ", expansion " + fmt("%.2g", std::max(0.0, expand)) + ", sigma scaling " +
                  fmt("%.2g", sigma_rel) + ", span angle " + fmt("%.2g", angle) + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 4: attack feasibility and the FGSM/PGD identity.

Verdict attack_feasibility() {
  const auto t0 = Clock::now();
  RngStream meta(404);
  double worst_ball = 0.0;
  bool box_ok = true, identity_ok = true;
  int invocations = 0;
  const NetworkSpec spec{16, {24}, 4};
  for (int trial = 0; trial < 1000; ++trial) {
    const Network net = Network::initialized(spec, static_cast<std::uint64_t>(trial % 25));
    const std::size_t n = 1 + meta.below(8);
    std::vector<double> x(n * 16);
    // A fifth of the coordinates sit on the box faces.
    for (double& v : x) v = meta.uniform() < 0.2 ? std::round(meta.uniform()) : meta.uniform();
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(meta.below(4));
    const Batch batch{Tensor::matrix(n, 16, x), y};
    Tensor adv;
    Norm norm = Norm::kLinf;
    double eps = meta.uniform(0.0, 0.5);
    switch (trial % 3) {
      case 0:
        adv = fgsm(net, batch, eps);
        break;
      case 1:
        adv = fast_fgsm(net, batch, eps, meta.uniform(0.0, 2.5) * eps, meta.split(trial));
        break;
      default: {
        AttackSpec a;
        a.norm = meta.below(2) ? Norm::kL2 : Norm::kLinf;
        if (a.norm == Norm::kL2) eps *= 4.0;
        a.epsilon = eps;
        a.alpha = meta.uniform(0.0, 1.5) * eps;
        a.steps = 1 + static_cast<int>(meta.below(10));
        a.restarts = 1 + static_cast<int>(meta.below(3));
        a.rand_init = meta.below(4) != 0;
        norm = a.norm;
        adv = pgd(net, batch, a, meta.split(trial)).inputs;
      }
    }
    ++invocations;
    worst_ball = std::max(worst_ball, ball_violation(batch.inputs, adv, norm, eps));
    for (double v : adv.values()) box_ok = box_ok && v >= 0.0 && v <= 1.0;
    if (trial % 10 == 0) {
      const AttackSpec one{Norm::kLinf, eps, eps * (1.0 + meta.uniform()), 1, 1, false, true};
      identity_ok = identity_ok && pgd(net, batch, one, meta.split(trial)).inputs == fgsm(net, batch, eps);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_ball <= 1e-12 && box_ok && identity_ok && secs < 30.0,
          std::to_string(invocations) + " invocations, worst ball excess " + fmt("%.3g", std::max(0.0, worst_ball)) +
              ", box " + (box_ok ? "exact" : "violated") + ", PGD-1 == FGSM " + (identity_ok ? "bitwise" : "NO") +
              ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// Recipe-driven criteria (5-12).

struct SubRun {
  SubAtResult result;
  FinalSummary summary;
  std::optional<std::size_t> event;
  double worst_confinement = 0.0;
  bool rewound = false;
  double seconds = 0.0;
};

SubRun run_sub(const RunPlan& plan, TrainConfig config, const SubspaceBasis& basis, const Trajectory& traj) {
  SubRun out;
  const ParamVector& w0 = traj.snapshot(0);
  const auto t0 = Clock::now();
  out.result = train_sub_at(plan.arch, basis, traj, config, plan.train, plan.val, [&](std::size_t e, const ParamVector& w) {
    if (e == 0) out.rewound = (w == w0);
    ParamVector diff = w;
    kernels::axpy(-1.0, w0.values(), diff.values());
    const double len = diff.norm();
    if (len == 0.0) return;
    const ParamVector inside = project(basis, diff);
    kernels::axpy(-1.0, inside.values(), diff.values());
    out.worst_confinement = std::max(out.worst_confinement, diff.norm() / len);
  });
  out.seconds = seconds_since(t0);
  out.summary = aggregate_final(out.result.metrics);
  out.event = detect_catastrophic(out.result.metrics);
  return out;
}

Trajectory before_epoch(const Trajectory& traj, std::size_t epoch) {
  Trajectory out = traj;
  std::size_t keep = 0;
  while (keep < traj.size() && traj.meta(keep).epoch < epoch) ++keep;
  out.truncate(keep);
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v.empty() ? 0.0 : v[v.size() / 2];
}

double max_grad_norm(const std::vector<MetricsRecord>& m) {
  double g = 0;
  for (const MetricsRecord& r : m) g = std::max(g, r.avg_sample_grad_norm);
  return g;
}

void print_series(const char* label, const std::vector<MetricsRecord>& m) {
  std::printf("# %s robust_val_acc/avg_sample_grad_norm per epoch:", label);
  for (const MetricsRecord& r : m) std::printf(" %.3f/%.2f", r.robust_val_acc, r.avg_sample_grad_norm);
  std::printf("\n");
}

std::string slurp(const fs::path& p) {
  const auto b = io::read_bytes(p);
  return {b.begin(), b.end()};
}

int run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::printf("# cli %s failed (%d): %s", args.front().c_str(), code, err.str().c_str());
  return code;
}

Verdict formats_and_determinism(const fs::path& recipe, const fs::path& scratch, const Trajectory& traj,
                                const SubspaceBasis& basis, const ParamVector& final_params) {
  // Byte round trips of the recipe's real artifacts.
  bool trip = true;
  for (const auto& bytes : {io::encode_checkpoint(final_params), io::encode_trajectory(traj), io::encode_basis(basis)}) {
    const fs::path p = scratch / "roundtrip.bin";
    io::write_atomic(p, bytes);
    const auto back = io::read_bytes(p);
    std::vector<std::uint8_t> again;
    switch (back[4]) {
      case 1: again = io::encode_checkpoint(io::decode_checkpoint(back)); break;
      case 2: again = io::encode_trajectory(io::decode_trajectory(back)); break;
      default: again = io::encode_basis(io::decode_basis(back)); break;
    }
    trip = trip && back == bytes && again == bytes;
  }
  // Two complete CLI pipelines from the same config and seed, shortened.
  std::string text = slurp(recipe);
  const Config full = Config::parse(text);
  Config shortened = full;
  shortened.set("train.epochs", "3");
  shortened.set("sample.epochs", "3");
  shortened.set("sub.epochs", "2");
  std::string cfg_text;
  for (const auto& [k, v] : shortened.values()) cfg_text += k + " = " + v + "\n";
  const fs::path cfg = scratch / "short.cfg";
  io::write_atomic(cfg, cfg_text);
  bool same = true;
  std::vector<std::string> outputs;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = scratch / ("det" + std::to_string(rep));
    same = same && run_cli({"train-at", "--config", cfg.string(), "--out", (dir / "at").string()}) == 0;
    same = same && run_cli({"extract", "--trajectory", (dir / "at" / "trajectory.bin").string(), "--dim", "4", "--out",
                            (dir / "basis.bin").string()}) == 0;
    same = same && run_cli({"train-sub", "--config", cfg.string(), "--basis", (dir / "basis.bin").string(),
                            "--trajectory", (dir / "at" / "trajectory.bin").string(), "--out", (dir / "sub").string()}) == 0;
    if (!same) break;
    outputs.push_back(slurp(dir / "at" / "metrics.csv") + slurp(dir / "at" / "final.ckpt") + slurp(dir / "at" / "trajectory.bin") +
                      slurp(dir / "basis.bin") + slurp(dir / "sub" / "metrics.csv") + slurp(dir / "sub" / "final.ckpt"));
  }
  const bool identical = same && outputs.size() == 2 && outputs[0] == outputs[1];
  return {trip && identical, std::string("artifact round trips ") + (trip ? "bit-exact" : "DIFFER") +
                                 ", repeated train-at/extract/train-sub outputs " + (identical ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <recipe.cfg> [scratch-dir]\n");
    return 2;
  }
  const fs::path recipe = argv[1];
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "subat_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  criterion(1, "gradient exactness", gradient_exactness);
  criterion(2, "DLDR oracle equivalence", dldr_oracle);
  criterion(3, "basis/projection properties", basis_properties);
  criterion(4, "attack feasibility", attack_feasibility);

  RunPlan plan;
  AtResult at;
  double at_seconds = 0.0;
  try {
    plan = build_plan(Config::load(recipe));
    const auto t0 = Clock::now();
    at = train_at(plan.arch, plan.at, plan.train, plan.val);
    at_seconds = seconds_since(t0);
  } catch (const std::exception& e) {
    for (int id = 5; id <= 12; ++id) report(id, "recipe", {false, std::string("recipe run failed: ") + e.what()});
    return finish();
  }
  print_series("full-space AT", at.metrics);
  const auto event = detect_catastrophic(at.metrics);

  criterion(6, "catastrophic-overfitting analog", [&]() -> Verdict {
    if (!event) {
      return {false, "no catastrophic event in " + std::to_string(at.metrics.size()) + " epochs (best robust " +
                         fmt("%.3f", aggregate_final(at.metrics).best) + "), " + fmt("%.1f", at_seconds) + " s"};
    }
    const std::size_t e = *event - 1;
    double before = 0;
    std::size_t k = 0;
    for (std::size_t j = e >= 5 ? e - 5 : 0; j < e; ++j, ++k) before += at.metrics[j].avg_sample_grad_norm;
    const double ratio = k ? at.metrics[e].avg_sample_grad_norm / (before / static_cast<double>(k)) : 0.0;
    double running = 0;
    for (std::size_t j = 0; j < e; ++j) running = std::max(running, at.metrics[j].robust_val_acc);
    return {ratio >= 3.0 && at_seconds < 600.0,
            "event at epoch " + std::to_string(*event) + ": robust " + fmt("%.3f", running) + " -> " +
                fmt("%.3f", at.metrics[e].robust_val_acc) + ", grad-norm ratio " + fmt("%.2f", ratio) + ", " +
                fmt("%.1f", at_seconds) + " s"};
  });

  // Stored-and-reloaded trajectory: sub-AT must rewind to the file's bytes.
  const fs::path traj_path = scratch / "trajectory.bin";
  io::write_trajectory(traj_path, at.trajectory);
  const Trajectory stored = io::read_trajectory(traj_path);
  const std::size_t cut = event ? *event : at.metrics.size() + 1;
  const Trajectory pre = before_epoch(stored, cut);
  double best_pre = 0;
  for (std::size_t j = 0; j + 1 < cut && j < at.metrics.size(); ++j) best_pre = std::max(best_pre, at.metrics[j].robust_val_acc);
  std::printf("# pre-collapse trajectory: %zu of %zu snapshots, best pre-collapse robust %.3f\n", pre.size(), stored.size(), best_pre);

  const TrainConfig& base = plan.sub;
  const std::size_t d_main = 40;
  auto t_ex = Clock::now();
  std::optional<SubspaceBasis> b40;
  std::optional<SubRun> main_run;
  double extract_seconds = 0;
  try {
    b40 = extract_subspace(pre, d_main);
    extract_seconds = seconds_since(t_ex);
    TrainConfig cfg = base;
    cfg.schedule = ScheduleSpec::constant(1.0);
    cfg.epochs = 40;
    main_run = run_sub(plan, cfg, *b40, pre);
    print_series("sub-AT d=40 lr=1", main_run->result.metrics);
  } catch (const std::exception& e) {
    std::printf("# sub-AT main run failed: %s\n", e.what());
  }

  criterion(5, "subspace confinement", [&]() -> Verdict {
    if (!main_run) return {false, "main sub-AT run unavailable"};
    const bool init_match = stored.snapshot(0) == Network::initialized(plan.arch, plan.seed).params();
    return {main_run->worst_confinement < 1e-8 && main_run->rewound && init_match,
            "max relative orthogonal drift " + fmt("%.3g", main_run->worst_confinement) + " over " +
                std::to_string(main_run->result.metrics.size()) + " epochs, rewind " +
                (main_run->rewound && init_match ? "bit-exact" : "MISMATCH")};
  });

  criterion(7, "sub-AT rescue", [&]() -> Verdict {
    if (!main_run) return {false, "main sub-AT run unavailable"};
    const SubRun& r = *main_run;
    const double entry = r.result.entry.avg_sample_grad_norm;
    const double peak = max_grad_norm(r.result.metrics);
    const bool a = !r.event, b = peak <= 1.5 * entry, c = r.summary.final >= best_pre - 0.02, d = r.summary.gap < 0.01;
    return {a && b && c && d && r.seconds < 600.0,
            std::string("(a) event ") + (r.event ? "at " + std::to_string(*r.event) : "none") + "; (b) peak grad norm " +
                fmt("%.3f", peak) + " vs entry " + fmt("%.3f", entry) + "; (c) final robust " + fmt("%.3f", r.summary.final) +
                " vs best pre-collapse " + fmt("%.3f", best_pre) + "; (d) gap " + fmt("%.4f", r.summary.gap) + "; " +
                fmt("%.1f", r.seconds) + " s"};
  });

  criterion(8, "learning-rate insensitivity", [&]() -> Verdict {
    if (!main_run) return {false, "main sub-AT run unavailable"};
    std::vector<double> finals;
    std::string detail;
    for (double lr : {0.3, 1.0, 3.0}) {
      double f = main_run->summary.final;
      if (lr != 1.0) {
        TrainConfig cfg = base;
        cfg.schedule = ScheduleSpec::constant(lr);
        f = run_sub(plan, cfg, *b40, pre).summary.final;
      }
      finals.push_back(f);
      detail += "lr " + fmt("%g", lr) + " -> " + fmt("%.3f", f) + "; ";
    }
    const double spread = *std::max_element(finals.begin(), finals.end()) - *std::min_element(finals.begin(), finals.end());
    return {spread < 0.03, detail + "spread " + fmt("%.3f", spread)};
  });

  criterion(9, "dimension insensitivity", [&]() -> Verdict {
    if (!main_run) return {false, "main sub-AT run unavailable"};
    std::vector<double> bests;
    std::string detail;
    for (std::size_t d : {20u, 40u, 60u}) {
      double b = main_run->summary.best;
      if (d != d_main) {
        TrainConfig cfg = base;
        cfg.schedule = ScheduleSpec::constant(1.0);
        b = run_sub(plan, cfg, extract_subspace(pre, d), pre).summary.best;
      }
      bests.push_back(b);
      detail += "d " + std::to_string(d) + " -> " + fmt("%.3f", b) + "; ";
    }
    const double spread = *std::max_element(bests.begin(), bests.end()) - *std::min_element(bests.begin(), bests.end());
    return {spread < 0.02, detail + "spread " + fmt("%.3f", spread)};
  });

  criterion(10, "larger radius is non-destructive", [&]() -> Verdict {
    if (!main_run) return {false, "main sub-AT run unavailable"};
    TrainConfig cfg = base;
    cfg.schedule = ScheduleSpec::constant(1.0);
    cfg.attack.alpha = 1.5 * cfg.attack.alpha;
    cfg.attack.epsilon = 1.5 * cfg.attack.epsilon;
    const SubRun wide = run_sub(plan, cfg, *b40, pre);
    print_series("sub-AT eps'=1.5eps", wide.result.metrics);
    const double ref = main_run->summary.final;
    return {!wide.event && wide.summary.final >= ref - 0.02,
            std::string("event ") + (wide.event ? "at " + std::to_string(*wide.event) : "none") + ", robust at eps " +
                fmt("%.3f", wide.summary.final) + " vs eps-trained " + fmt("%.3f", ref)};
  });

  criterion(11, "overhead bound", [&]() -> Verdict {
    if (!b40) return {false, "basis unavailable"};
    const double at_epoch = median(at.epoch_train_seconds);
    auto sub_epoch = [&](const SubspaceBasis& b) {
      TrainConfig cfg = base;
      cfg.epochs = 3;
      return median(train_sub_at(plan.arch, b, stored, cfg, plan.train, plan.val).epoch_train_seconds);
    };
    // The bound must hold up to d = 128; the largest d the full trajectory supports is the worst case.
    const std::size_t d = std::min<std::size_t>(128, stored.size() - 1);
    const double worst = sub_epoch(extract_subspace(stored, d));
    const double recipe = sub_epoch(*b40);
    const double share = extract_seconds / at_seconds;
    return {share < 0.05 && worst <= 1.3 * at_epoch,
            "extraction " + fmt("%.3f", extract_seconds) + " s = " + fmt("%.2f", 100 * share) + "% of sampling run; epoch " +
                fmt("%.3f", worst) + " s at d=" + std::to_string(d) + " and " + fmt("%.3f", recipe) + " s at d=40 vs " +
                fmt("%.3f", at_epoch) + " s full-space, ratios " + fmt("%.2f", worst / at_epoch) + " / " +
                fmt("%.2f", recipe / at_epoch)};
  });

  criterion(12, "file formats and determinism", [&]() -> Verdict {
    if (!b40) return {false, "basis unavailable"};
    return formats_and_determinism(recipe, scratch, stored, *b40, at.final_params);
  });

  return finish();
}
