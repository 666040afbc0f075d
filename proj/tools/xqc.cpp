#include <CLI11.hpp>
#include <cstdio>

#include "xqc/cli/plan.hpp"
#include "xqc/cli/reports.hpp"
#include "xqc/cli/runner.hpp"
#include "xqc/verify/checks.hpp"

using namespace xqc;

namespace {

struct TrainArgs {
  std::string task = "pendulum";
  std::string arch = "bn,wn,ce";
  long steps = 30000;
  uint64_t seed = 0;
  std::string out = "runs";
  int hidden = 32;
  int blocks = 2;
  int atoms = 101;
  int utd = 2;
  int batch = 256;
  long probe_every = 250;
  int spectra = 10;
  int lanczos_m = 64;
  int lanczos_k = 8;
  bool no_target_net = false;
  bool no_joint_forward = false;
  bool no_lr_schedule = false;
  bool per_row_projection = false;
  bool f32 = false;
};

int cmd_train(const TrainArgs& args) {
  cli::ExperimentPlan plan;
  plan.task = args.task;
  netlib::ArchitectureConfig base;
  base.hidden_dim = args.hidden;
  base.num_blocks = args.blocks;
  base.atoms = args.atoms;
  base.per_row_projection = args.per_row_projection;
  plan.cells = {netlib::parse_cell(args.arch, base)};
  plan.seeds = {args.seed};
  plan.total_steps = args.steps;
  plan.probe_every = args.probe_every;
  plan.spectrum_count = args.spectra;
  plan.lanczos_steps = args.lanczos_m;
  plan.lanczos_probes = args.lanczos_k;
  plan.out_dir = args.out;
  plan.trainer.utd = args.utd;
  plan.trainer.batch_size = args.batch;
  plan.trainer.use_target_networks = !args.no_target_net;
  plan.trainer.joint_forward = !args.no_joint_forward;
  plan.trainer.lr_schedule = !args.no_lr_schedule;
  plan.trainer.f32 = args.f32;
  plan.validate();

  cli::RunResult result = cli::execute_run(plan, 0, args.seed);
  if (result.failed) {
    std::fprintf(stderr, "train failed: %s\n", result.error.c_str());
    return 1;
  }
  std::printf("run dir: %s\n", result.artifacts.run_dir.c_str());
  std::printf("episodes: %zu\n", result.artifacts.episode_returns.size());
  if (std::isfinite(result.final_raw))
    std::printf("final raw score: %s, normalized: %s, auc: %s\n", fmt6(result.final_raw).c_str(),
                fmt6(result.final_normalized).c_str(), fmt6(result.auc).c_str());
  return 0;
}

int cmd_matrix(const std::string& plan_path) {
  auto plan = cli::ExperimentPlan::from_kv(cli::KvFile::load(plan_path));
  auto rows = cli::run_matrix(plan);
  std::printf("%-14s %12s %14s %12s %10s\n", "cell", "iqm_kappa", "iqm_lambda_max",
              "iqm_kurtosis", "iqm_return");
  bool ok = true;
  for (const auto& r : rows) {
    std::printf("%-14s %12s %14s %12s %10s\n", r.cell.c_str(), fmt6(r.kappa.iqm).c_str(),
                fmt6(r.lambda_max.iqm).c_str(), fmt6(r.kurtosis.iqm).c_str(),
                fmt6(r.ret.iqm).c_str());
    if (r.seeds_failed > 0) ok = false;
  }
  std::printf("summary: %s/matrix_summary.csv\n", plan.out_dir.c_str());
  return ok ? 0 : 1;
}

int cmd_scaling(const std::string& plan_path, const std::string& axis,
                const std::string& values_csv) {
  cli::ExperimentPlan plan;
  if (!plan_path.empty()) plan = cli::ExperimentPlan::from_kv(cli::KvFile::load(plan_path));
  if (plan.cells.empty()) plan.cells = {netlib::ArchitectureConfig{}};
  std::vector<double> values;
  std::istringstream is(values_csv);
  std::string tok;
  while (std::getline(is, tok, ',')) values.push_back(std::stod(tok));
  auto rows = cli::run_scaling(plan, axis, values);
  bool ok = true;
  std::printf("%-8s %12s %12s %12s\n", axis.c_str(), "iqm_auc", "ci_low", "ci_high");
  for (const auto& r : rows) {
    std::printf("%-8s %12s %12s %12s\n", fmt6(r.value).c_str(), fmt6(r.auc.iqm).c_str(),
                fmt6(r.auc.ci_low).c_str(), fmt6(r.auc.ci_high).c_str());
    if (r.seeds_failed > 0) ok = false;
  }
  return ok ? 0 : 1;
}

int cmd_report(const std::string& dir) {
  auto written = cli::render_reports(dir);
  for (const auto& f : written) std::printf("wrote %s\n", f.c_str());
  std::printf("%zu report files\n", written.size());
  return 0;
}

int cmd_verify() {
  auto checks = verify::run_fast_checks();
  bool all = true;
  for (const auto& c : checks) {
    std::printf("[%s] %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.pass;
  }
  std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"actor-critic training with loss-landscape diagnostics"};
  app.require_subcommand(1);

  TrainArgs targs;
  auto* train = app.add_subcommand("train", "train one agent on a toy task");
  train->add_option("--task", targs.task, "pendulum | double_integrator | reacher2");
  train->add_option("--arch", targs.arch, "cell spec, e.g. bn,wn,ce");
  train->add_option("--steps", targs.steps, "environment steps");
  train->add_option("--seed", targs.seed, "run seed");
  train->add_option("--out", targs.out, "output directory root");
  train->add_option("--hidden", targs.hidden, "hidden width");
  train->add_option("--blocks", targs.blocks, "hidden blocks");
  train->add_option("--atoms", targs.atoms, "categorical atoms");
  train->add_option("--utd", targs.utd, "critic updates per env step");
  train->add_option("--batch", targs.batch, "batch size");
  train->add_option("--probe-every", targs.probe_every, "diagnostics interval");
  train->add_option("--spectra", targs.spectra, "number of spectrum checkpoints");
  train->add_option("--lanczos-m", targs.lanczos_m, "lanczos iterations");
  train->add_option("--lanczos-k", targs.lanczos_k, "lanczos probes");
  train->add_flag("--no-target-net", targs.no_target_net, "bootstrap from the online critics");
  train->add_flag("--no-joint-forward", targs.no_joint_forward,
                  "do not mix next-state statistics into the online pass");
  train->add_flag("--no-lr-schedule", targs.no_lr_schedule, "constant learning rate");
  train->add_flag("--per-row-projection", targs.per_row_projection,
                  "project weight rows instead of whole matrices");
  train->add_flag("--f32", targs.f32, "single-precision update graphs");

  std::string plan_path;
  auto* matrix = app.add_subcommand("matrix", "run an architecture-cell matrix from a plan file");
  matrix->add_option("--plan", plan_path, "plan file (key=value)")->required();

  std::string axis = "utd", values_csv = "1,2", scaling_plan;
  auto* scaling = app.add_subcommand("scaling", "sweep utd, width or depth");
  scaling->add_option("--axis", axis, "utd | width | depth");
  scaling->add_option("--values", values_csv, "comma-separated sweep values");
  scaling->add_option("--plan", scaling_plan, "optional base plan file");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "render SVG/CSV reports for a run tree");
  report->add_option("dir", report_dir, "runs directory")->required();

  app.add_subcommand("verify", "run the oracle and bound certificate suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) return cmd_train(targs);
    if (app.got_subcommand("matrix")) return cmd_matrix(plan_path);
    if (app.got_subcommand("scaling")) return cmd_scaling(scaling_plan, axis, values_csv);
    if (app.got_subcommand("report")) return cmd_report(report_dir);
    if (app.got_subcommand("verify")) return cmd_verify();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
