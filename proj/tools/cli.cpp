#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "subat/config.hpp"
#include "subat/error.hpp"
#include "subat/io.hpp"
#include "subat/kernels.hpp"
#include "subat/pipeline.hpp"
#include "subat/subspace.hpp"
#include "subat/trainer.hpp"

namespace subat::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string kernels;
};

void select_kernels(const std::string& name) {
  try {
    kernels::select(kernels::parse_backend(name));
  } catch (const ParameterError& e) {
    throw ConfigError("kernels", e.what());
  }
}

void apply_kernels(const Config& cfg, const Common& common) {
  select_kernels(common.kernels.empty() ? cfg.string("kernels", "auto") : common.kernels);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void check_net_matches(const RunPlan& plan, std::size_t n, const char* what) {
  if (plan.arch.param_count() != n) {
    throw DimensionError(std::string(what) + " holds " + std::to_string(n) + " parameters, the configured model has " +
                         std::to_string(plan.arch.param_count()));
  }
}

struct SubRun {
  SubAtResult result;
  FinalSummary summary;
  std::optional<std::size_t> collapse;
};

SubRun run_sub(const RunPlan& plan, const TrainConfig& config, const SubspaceBasis& basis,
               const Trajectory& trajectory, const fs::path& out_dir) {
  check_net_matches(plan, trajectory.dim(), "trajectory");
  SubRun run;
  run.result = train_sub_at(plan.arch, basis, trajectory, config, plan.train, plan.val);
  if (!run.result.metrics.empty()) {
    run.summary = aggregate_final(run.result.metrics);
    run.collapse = detect_catastrophic(run.result.metrics);
  }
  ensure_dir(out_dir);
  io::write_metrics(out_dir / "metrics.csv", run.result.metrics);
  io::write_checkpoint(out_dir / "final.ckpt", run.result.final_params);
  return run;
}

void report_summary(std::ostream& out, const std::vector<MetricsRecord>& metrics) {
  if (metrics.empty()) {
    out << "no epochs run\n";
    return;
  }
  const FinalSummary s = aggregate_final(metrics);
  const auto event = detect_catastrophic(metrics);
  out << "best_robust=" << fmt(s.best) << " best_epoch=" << s.best_epoch << " final_robust=" << fmt(s.final)
      << " gap=" << fmt(s.gap) << " catastrophic=" << (event ? std::to_string(*event) : "none") << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial training with trajectory subspace extraction", "subat"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Override the config seed");
  app.add_option("--kernels", common.kernels, "Kernel backend: auto, scalar or avx2");

  std::string config_path, out_path, traj_path, basis_path, ckpt_path, csv_path;
  std::size_t dim = 0;

  auto* train_at_cmd = app.add_subcommand("train-at", "Adversarial training with trajectory sampling");
  train_at_cmd->add_option("--config", config_path)->required();
  train_at_cmd->add_option("--out", out_path, "Output directory")->required();

  auto* extract_cmd = app.add_subcommand("extract", "Extract a subspace basis from a trajectory");
  extract_cmd->add_option("--trajectory", traj_path)->required();
  extract_cmd->add_option("--dim", dim, "Basis dimension d")->required();
  extract_cmd->add_option("--out", out_path, "Basis file")->required();

  auto* train_sub_cmd = app.add_subcommand("train-sub", "Projected adversarial training in a subspace");
  train_sub_cmd->add_option("--config", config_path)->required();
  train_sub_cmd->add_option("--basis", basis_path)->required();
  train_sub_cmd->add_option("--trajectory", traj_path)->required();
  train_sub_cmd->add_option("--out", out_path, "Output directory")->required();

  std::string attack_kind = "pgd", norm_name_arg;
  std::optional<int> steps, restarts;
  std::optional<double> eps, alpha;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the validation split");
  eval_cmd->add_option("--config", config_path)->required();
  eval_cmd->add_option("--ckpt", ckpt_path)->required();
  eval_cmd->add_option("--attack", attack_kind)->check(CLI::IsMember({"none", "fgsm", "pgd"}));
  eval_cmd->add_option("--steps", steps);
  eval_cmd->add_option("--restarts", restarts);
  eval_cmd->add_option("--eps", eps);
  eval_cmd->add_option("--alpha", alpha);
  eval_cmd->add_option("--norm", norm_name_arg)->check(CLI::IsMember({"linf", "l2"}));
  eval_cmd->add_option("--csv", csv_path, "Append a result row to this CSV");

  std::string sweep_param, sweep_values;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sub-AT over several attack step sizes or radii");
  sweep_cmd->add_option("--config", config_path)->required();
  sweep_cmd->add_option("--basis", basis_path)->required();
  sweep_cmd->add_option("--trajectory", traj_path)->required();
  sweep_cmd->add_option("--param", sweep_param)->required()->check(CLI::IsMember({"alpha", "eps"}));
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep_cmd->add_option("--out", out_path, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*extract_cmd) {
      const Trajectory traj = io::read_trajectory(traj_path);
      if (!common.kernels.empty()) select_kernels(common.kernels);
      SubspaceBasis basis = extract_subspace(traj, dim);
      basis.source = traj_path;
      io::write_basis(out_path, basis);
      out << "basis N=" << basis.dim() << " d=" << basis.rank() << " sigma_1=" << fmt(basis.sigma.front())
          << " sigma_d=" << fmt(basis.sigma.back()) << '\n';
      return kOk;
    }

    const Config cfg = Config::load(config_path);
    apply_kernels(cfg, common);
    const RunPlan plan = build_plan(cfg, common.seed);

    if (*train_at_cmd) {
      const AtResult r = train_at(plan.arch, plan.at, plan.train, plan.val);
      const fs::path dir(out_path);
      ensure_dir(dir);
      io::write_metrics(dir / "metrics.csv", r.metrics);
      io::write_trajectory(dir / "trajectory.bin", r.trajectory);
      io::write_checkpoint(dir / "final.ckpt", r.final_params);
      out << "trajectory t=" << r.trajectory.size() << " N=" << r.trajectory.dim() << '\n';
      report_summary(out, r.metrics);
      return kOk;
    }

    if (*train_sub_cmd) {
      const SubspaceBasis basis = io::read_basis(basis_path);
      const Trajectory traj = io::read_trajectory(traj_path);
      const SubRun run = run_sub(plan, plan.sub, basis, traj, out_path);
      report_summary(out, run.result.metrics);
      return kOk;
    }

    if (*eval_cmd) {
      const ParamVector params = io::read_checkpoint(ckpt_path);
      check_net_matches(plan, params.size(), "checkpoint");
      const Network net(plan.arch, params);
      std::optional<AttackSpec> attack;
      if (attack_kind != "none") {
        AttackSpec a = plan.at.eval_attack;
        if (!norm_name_arg.empty()) a.norm = parse_norm(norm_name_arg);
        if (eps) a.epsilon = *eps;
        if (attack_kind == "fgsm") {
          a.steps = 1;
          a.restarts = 1;
          a.rand_init = false;
          a.alpha = a.epsilon;
        } else {
          if (steps) a.steps = *steps;
          if (restarts) a.restarts = *restarts;
          a.alpha = alpha ? *alpha : (eps ? a.epsilon / 4.0 : a.alpha);
        }
        if (alpha && attack_kind == "fgsm") a.alpha = *alpha;
        try {
          a.validate();
        } catch (const ParameterError& e) {
          throw ConfigError("eval", e.what());
        }
        attack = a;
      }
      const Accuracy acc = evaluate(net, plan.val, attack, RngStream(plan.seed).split(0x4556414c));
      out << "attack=" << attack_kind << " natural=" << fmt(acc.natural) << " robust=" << fmt(acc.robust) << '\n';
      if (!csv_path.empty()) {
        std::string text;
        if (fs::exists(csv_path)) {
          const auto bytes = io::read_bytes(csv_path);
          text.assign(bytes.begin(), bytes.end());
        } else {
          text = "checkpoint,attack,eps,steps,restarts,natural_acc,robust_acc\n";
        }
        text += ckpt_path + ',' + attack_kind + ',' + (attack ? fmt(attack->epsilon) : "0") + ',' +
                std::to_string(attack ? attack->steps : 0) + ',' + std::to_string(attack ? attack->restarts : 0) +
                ',' + fmt(acc.natural) + ',' + fmt(acc.robust) + '\n';
        io::write_atomic(csv_path, text);
      }
      return kOk;
    }

    if (*sweep_cmd) {
      const std::vector<double> values = parse_real_list(sweep_values, "--values");
      for (double v : values) {
        if (!(v > 0.0)) throw ConfigError("--values", "sweep values must be positive");
      }
      // Read once; every value trains in the same basis.
      const SubspaceBasis basis = io::read_basis(basis_path);
      const Trajectory traj = io::read_trajectory(traj_path);
      const fs::path dir(out_path);
      ensure_dir(dir);
      std::string summary = "param,value,attack_eps,attack_alpha,best_robust,best_epoch,final_robust,gap,catastrophic_epoch\n";
      for (std::size_t i = 0; i < values.size(); ++i) {
        TrainConfig config = plan.sub;
        if (sweep_param == "alpha") {
          config.attack.alpha = values[i];
        } else if (values[i] != config.attack.epsilon) {
          // Keep the step-to-radius ratio; validation stays at the base radius.
          config.attack.alpha = values[i] * (config.attack.alpha / config.attack.epsilon);
          config.attack.epsilon = values[i];
        }
        const SubRun run = run_sub(plan, config, basis, traj, dir / (sweep_param + "_" + std::to_string(i)));
        summary += sweep_param + ',' + fmt(values[i]) + ',' + fmt(config.attack.epsilon) + ',' +
                   fmt(config.attack.alpha) + ',' + fmt(run.summary.best) + ',' +
                   std::to_string(run.summary.best_epoch) + ',' + fmt(run.summary.final) + ',' +
                   fmt(run.summary.gap) + ',' + (run.collapse ? std::to_string(*run.collapse) : "none") + '\n';
        out << sweep_param << '=' << fmt(values[i]) << ' ';
        report_summary(out, run.result.metrics);
      }
      io::write_atomic(dir / "summary.csv", summary);
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIoError;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  }
  return kConfigError;
}

}  // namespace subat::cli
