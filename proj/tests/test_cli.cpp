#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>

#include "xqc/cli/plan.hpp"
#include "xqc/cli/reports.hpp"
#include "xqc/cli/runner.hpp"

using namespace xqc;
using namespace xqc::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

ExperimentPlan tiny_plan(const std::string& out) {
  ExperimentPlan plan;
  netlib::ArchitectureConfig base;
  base.hidden_dim = 8;
  base.num_blocks = 1;
  base.atoms = 11;
  plan.cells = {base};
  plan.seeds = {0};
  plan.total_steps = 0;
  plan.lanczos_steps = 8;
  plan.lanczos_probes = 2;
  plan.trainer.batch_size = 16;
  plan.trainer.warmup_steps = 32;
  plan.trainer.utd = 1;
  plan.trainer.probe_batch_size = 16;
  plan.out_dir = out;
  return plan;
}

}  // namespace

TEST_CASE("key=value plan parsing") {
  auto kv = KvFile::parse("# comment\n task = pendulum \nsteps=123\nseeds = 3, 5 ,7\n"
                          "cells = bn+wn+ce; ln,nown,mse  # trailing\n");
  CHECK(kv.get("task", "") == "pendulum");
  CHECK(kv.get_long("steps", 0) == 123);
  auto plan = ExperimentPlan::from_kv(kv);
  CHECK(plan.task == "pendulum");
  CHECK(plan.total_steps == 123);
  CHECK(plan.seeds == std::vector<uint64_t>{3, 5, 7});
  REQUIRE(plan.cells.size() == 2);
  CHECK(plan.cells[0].cell_name() == "bn+wn+ce");
  CHECK(plan.cells[1].cell_name() == "ln+nown+mse");

  CHECK_THROWS_AS(KvFile::parse("not a pair\n"), ConfigError);
  auto dup = KvFile::parse("seeds=1,1\n");
  CHECK_THROWS_AS(ExperimentPlan::from_kv(dup), ConfigError);

  auto all = ExperimentPlan::from_kv(KvFile::parse("cells=all\n"));
  CHECK(all.cells.size() == 12);
}

TEST_CASE("matrix with one cell, one seed and zero steps emits an init spectrum row") {
  std::string out = "cli_matrix_zero";
  fs::remove_all(out);
  auto plan = tiny_plan(out);
  auto rows = run_matrix(plan);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].seeds_ok == 1);
  CHECK(std::isfinite(rows[0].kappa.iqm));
  CHECK(rows[0].kappa.iqm >= 1.0);
  CHECK(fs::exists(out + "/matrix_summary.csv"));
  CHECK(fs::exists(out + "/kappa_vs_return.svg"));
  CHECK(fs::exists(out + "/bn-wn-ce/seed0/spectrum_0.csv"));
  auto csv = read_csv(out + "/matrix_summary.csv");
  REQUIRE(csv.has_value());
  CHECK(csv->rows.size() == 1);
  fs::remove_all(out);
}

TEST_CASE("normalized auc") {
  auto env = envs::make_env("pendulum");
  SECTION("constant reference-level curve scores exactly one") {
    std::vector<std::pair<long, double>> returns;
    for (long s = 1; s <= 600; ++s) returns.emplace_back(s, env->reference_score());
    CHECK(normalized_auc(returns, *env, 600) == 1.0);
  }
  SECTION("random-level curve scores near zero") {
    std::vector<std::pair<long, double>> returns;
    for (long s = 1; s <= 600; ++s) returns.emplace_back(s, env->random_policy_score());
    CHECK(normalized_auc(returns, *env, 600) == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("svg rendering is deterministic") {
  Series s{"a", "#3366bb", {{0, 1}, {1, 3}, {2, 2}}};
  CHECK(line_plot_svg("t", {s}) == line_plot_svg("t", {s}));
  CHECK(scatter_plot_svg("t", {s}) == scatter_plot_svg("t", {s}));
}

TEST_CASE("report rendering over a tiny run is byte-stable") {
  std::string out = "cli_report_run";
  fs::remove_all(out);
  auto plan = tiny_plan(out);
  plan.total_steps = 120;
  plan.probe_every = 40;
  plan.spectrum_count = 2;
  auto results = execute_runs(plan, /*echo=*/false);
  REQUIRE(results.size() == 1);
  REQUIRE_FALSE(results[0].failed);

  auto written1 = render_reports(out);
  REQUIRE_FALSE(written1.empty());
  std::map<std::string, std::string> bytes;
  for (const auto& f : written1) bytes[f] = slurp(f);
  auto written2 = render_reports(out);
  CHECK(written1 == written2);
  for (const auto& f : written2) CHECK(slurp(f) == bytes[f]);
  CHECK(fs::exists(out + "/report_index.txt"));
  fs::remove_all(out);
}

TEST_CASE("report on an empty directory warns and writes an empty index") {
  std::string out = "cli_report_empty";
  fs::remove_all(out);
  fs::create_directories(out);
  auto written = render_reports(out);
  CHECK(written.empty());
  CHECK(fs::exists(out + "/report_index.txt"));
  CHECK(slurp(out + "/report_index.txt").empty());
  fs::remove_all(out);
}

TEST_CASE("scaling sweep produces one row per value") {
  std::string out = "cli_scaling";
  fs::remove_all(out);
  auto plan = tiny_plan(out);
  plan.total_steps = 300;
  plan.spectrum_count = 0;
  auto rows = run_scaling(plan, "utd", {1, 2});
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.seeds_ok == 1);
    CHECK(std::isfinite(r.auc.iqm));
    CHECK(r.auc.iqm >= 0.0);
    CHECK(r.auc.iqm <= 1.0);
  }
  CHECK(fs::exists(out + "/scaling_utd.csv"));
  CHECK_THROWS_AS(run_scaling(plan, "utd", {2, 1}), ConfigError);   // unsorted
  CHECK_THROWS_AS(run_scaling(plan, "banana", {1}), ConfigError);  // unknown axis
  fs::remove_all(out);
}

TEST_CASE("worker count respects the thread cap") {
  setenv("XQC_THREADS", "1", 1);
  CHECK(worker_count() == 1);
  unsetenv("XQC_THREADS");
  CHECK(worker_count() >= 1);
}

TEST_CASE("matrix records per-cell failures and continues") {
  std::string out = "cli_matrix_fail";
  fs::remove_all(out);
  auto plan = tiny_plan(out);
  plan.total_steps = 0;
  plan.cells.push_back(plan.cells[0]);
  plan.cells[1].norm = netlib::Norm::None;
  plan.task = "pendulum";
  // force a failure in the second cell only: zero-atom config trips validation
  plan.cells[1].atoms = 1;
  plan.cells[1].critic_loss = netlib::CriticLoss::CE;
  auto rows = run_matrix(plan);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].seeds_ok == 1);
  CHECK(rows[1].seeds_failed == 1);
  CHECK(slurp(out + "/failures.txt").find("dense") != std::string::npos);
  fs::remove_all(out);
}
