#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <thread>

#include "xqc/cli/plan.hpp"
#include "xqc/cli/svg.hpp"
#include "xqc/envs/tasks.hpp"
#include "xqc/sacloop/trainer.hpp"
#include "xqc/spectra/stats.hpp"

namespace xqc::cli {

inline int worker_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("XQC_THREADS")) {
    long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return static_cast<int>(hw);
}

struct RunResult {
  size_t cell_index = 0;
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  sacloop::RunArtifacts artifacts;
  double final_raw = std::nan("");
  double final_normalized = std::nan("");
  double auc = std::nan("");
};

// Mean of the normalized learning curve over a fixed step grid, clipped to
// [0, 1]; captures speed and final level together.
inline double normalized_auc(const std::vector<std::pair<long, double>>& returns,
                             const envs::Env& env, long total_steps, int grid = 60) {
  if (total_steps <= 0 || returns.empty()) return std::nan("");
  double sum = 0;
  size_t cursor = 0;
  double window_value = 0.0;  // before any episode finishes the score is the random anchor
  double current = envs::normalized_score(env, env.random_policy_score());
  for (int gpt = 1; gpt <= grid; ++gpt) {
    long t = total_steps * static_cast<long>(gpt) / grid;
    double acc = 0;
    int n = 0;
    while (cursor < returns.size() && returns[cursor].first <= t) {
      acc += returns[cursor].second;
      ++n;
      ++cursor;
    }
    if (n > 0) current = envs::normalized_score(env, acc / n);
    window_value = std::min(1.0, std::max(0.0, current));
    sum += window_value;
  }
  return sum / grid;
}

// One (cell, seed) training run with artifacts under its own directory.
inline RunResult execute_run(const ExperimentPlan& plan, size_t cell_index, uint64_t seed) {
  RunResult result;
  result.cell_index = cell_index;
  result.seed = seed;
  const auto& cell = plan.cells[cell_index];
  std::string dir =
      plan.out_dir + "/" + cell_dir_name(cell) + "/seed" + std::to_string(seed);
  try {
    sacloop::RunWriter writer(dir);
    auto env = envs::make_env(plan.task);
    const envs::Env& frozen_env = *env;
    sacloop::Trainer trainer(std::move(env), cell, plan.trainer, seed, &writer);
    sacloop::RunOptions opts;
    opts.probe_schedule = plan.probe_schedule();
    opts.spectrum_schedule = plan.spectrum_schedule();
    opts.checkpoint_schedule = opts.spectrum_schedule;
    opts.lanczos_steps = plan.lanczos_steps;
    opts.lanczos_probes = plan.lanczos_probes;
    result.artifacts = trainer.train(plan.total_steps, opts);
    result.final_raw = sacloop::final_score(result.artifacts, plan.total_steps);
    if (std::isfinite(result.final_raw))
      result.final_normalized = envs::normalized_score(frozen_env, result.final_raw);
    result.auc = normalized_auc(result.artifacts.episode_returns, frozen_env, plan.total_steps);
  } catch (const std::exception& e) {
    result.failed = true;
    result.error = e.what();
  }
  return result;
}

// Executes every (cell, seed) pair on a small worker pool. Results come back
// in deterministic (cell, seed) order regardless of scheduling.
inline std::vector<RunResult> execute_runs(const ExperimentPlan& plan,
                                           bool echo_progress = true) {
  struct Job {
    size_t cell;
    uint64_t seed;
  };
  std::vector<Job> jobs;
  for (size_t c = 0; c < plan.cells.size(); ++c)
    for (uint64_t s : plan.seeds) jobs.push_back({c, s});
  std::vector<RunResult> results(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex io;
  int workers = std::min<int>(worker_count(), static_cast<int>(jobs.size()));
  auto work = [&]() {
    while (true) {
      size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      results[j] = execute_run(plan, jobs[j].cell, jobs[j].seed);
      if (echo_progress) {
        std::lock_guard<std::mutex> lock(io);
        std::fprintf(stderr, "[run %zu/%zu] %s seed %llu %s\n", j + 1, jobs.size(),
                     plan.cells[jobs[j].cell].cell_name().c_str(),
                     static_cast<unsigned long long>(jobs[j].seed),
                     results[j].failed ? results[j].error.c_str() : "done");
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return results;
}

struct CellSummary {
  std::string cell;
  spectra::IqmResult kappa, lambda_max, kurtosis, ret;
  int seeds_ok = 0;
  int seeds_failed = 0;
};

namespace detail {

inline spectra::IqmResult safe_iqm(std::vector<double> values, uint64_t seed) {
  spectra::IqmResult r;
  if (values.empty()) {
    r.iqm = r.ci_low = r.ci_high = std::nan("");
    return r;
  }
  if (values.size() < 3) {
    double mn = values[0], mx = values[0], sum = 0;
    for (double v : values) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      sum += v;
    }
    return {sum / values.size(), mn, mx};
  }
  return spectra::aggregate_iqm(values, 2000, seed);
}

}  // namespace detail

inline std::vector<CellSummary> summarize_matrix(const ExperimentPlan& plan,
                                                 const std::vector<RunResult>& results) {
  std::vector<CellSummary> rows;
  for (size_t c = 0; c < plan.cells.size(); ++c) {
    CellSummary row;
    row.cell = plan.cells[c].cell_name();
    std::vector<double> kappas, lmaxes, kurts, rets;
    for (const auto& r : results) {
      if (r.cell_index != c) continue;
      if (r.failed) {
        ++row.seeds_failed;
        continue;
      }
      ++row.seeds_ok;
      for (const auto& [step, summary] : r.artifacts.conditioning) {
        kappas.push_back(summary.kappa);
        lmaxes.push_back(summary.lambda_max);
        kurts.push_back(summary.kurtosis);
      }
      if (std::isfinite(r.final_normalized)) rets.push_back(r.final_normalized);
    }
    row.kappa = detail::safe_iqm(kappas, 101 + c);
    row.lambda_max = detail::safe_iqm(lmaxes, 202 + c);
    row.kurtosis = detail::safe_iqm(kurts, 303 + c);
    row.ret = detail::safe_iqm(rets, 404 + c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_matrix_summary(const std::string& path, const std::vector<CellSummary>& rows) {
  std::ofstream f(path);
  f << "cell,iqm_kappa,kappa_ci_low,kappa_ci_high,iqm_lambda_max,lambda_max_ci_low,"
       "lambda_max_ci_high,iqm_kurtosis,kurtosis_ci_low,kurtosis_ci_high,iqm_return,"
       "return_ci_low,return_ci_high,seeds_ok,seeds_failed\n";
  for (const auto& r : rows) {
    f << r.cell << "," << fmt17(r.kappa.iqm) << "," << fmt17(r.kappa.ci_low) << ","
      << fmt17(r.kappa.ci_high) << "," << fmt17(r.lambda_max.iqm) << ","
      << fmt17(r.lambda_max.ci_low) << "," << fmt17(r.lambda_max.ci_high) << ","
      << fmt17(r.kurtosis.iqm) << "," << fmt17(r.kurtosis.ci_low) << ","
      << fmt17(r.kurtosis.ci_high) << "," << fmt17(r.ret.iqm) << "," << fmt17(r.ret.ci_low)
      << "," << fmt17(r.ret.ci_high) << "," << r.seeds_ok << "," << r.seeds_failed << "\n";
  }
}

inline void write_kappa_scatter(const std::string& path, const std::vector<CellSummary>& rows) {
  std::vector<Series> series;
  for (const auto& r : rows) {
    if (!std::isfinite(r.kappa.iqm) || !std::isfinite(r.ret.iqm)) continue;
    Series s;
    s.label = r.cell;
    s.color = cell_color(r.cell);
    s.points.emplace_back(r.kappa.iqm, r.ret.iqm);
    series.push_back(std::move(s));
  }
  write_text_file(path, scatter_plot_svg("condition number vs normalized return", series,
                                         /*log_x=*/true));
}

// Executes the full cell matrix and writes matrix_summary.csv plus the
// condition-number scatter. Per-run failures are recorded and skipped.
inline std::vector<CellSummary> run_matrix(const ExperimentPlan& plan) {
  std::filesystem::create_directories(plan.out_dir);
  auto results = execute_runs(plan);
  auto rows = summarize_matrix(plan, results);
  write_matrix_summary(plan.out_dir + "/matrix_summary.csv", rows);
  write_kappa_scatter(plan.out_dir + "/kappa_vs_return.svg", rows);
  bool any_failed = false;
  std::ofstream fail(plan.out_dir + "/failures.txt");
  for (const auto& r : results)
    if (r.failed) {
      any_failed = true;
      fail << plan.cells[r.cell_index].cell_name() << " seed " << r.seed << ": " << r.error
           << "\n";
    }
  if (!any_failed) fail << "none\n";
  return rows;
}

struct ScalingRow {
  double value = 0;
  spectra::IqmResult auc;
  int seeds_ok = 0;
  int seeds_failed = 0;
};

// Sweeps utd, width or depth for the first cell of the plan and reports the
// IQM area under the normalized return curve per value.
inline std::vector<ScalingRow> run_scaling(const ExperimentPlan& base, const std::string& axis,
                                           const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("scaling: no values");
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1]) throw ConfigError("scaling: values must be sorted ascending");
  std::vector<ScalingRow> rows;
  std::filesystem::create_directories(base.out_dir);
  for (double v : values) {
    ExperimentPlan plan = base;
    plan.cells = {base.cells.at(0)};
    plan.spectrum_count = 0;
    if (axis == "utd") plan.trainer.utd = static_cast<int>(v);
    else if (axis == "width") plan.cells[0].hidden_dim = static_cast<int>(v);
    else if (axis == "depth") plan.cells[0].num_blocks = static_cast<int>(v);
    else throw ConfigError("scaling: axis must be utd, width or depth");
    std::ostringstream tag;
    tag << base.out_dir << "/scaling_" << axis << "_" << fmt6(v);
    plan.out_dir = tag.str();
    auto results = execute_runs(plan);
    ScalingRow row;
    row.value = v;
    std::vector<double> aucs;
    for (const auto& r : results) {
      if (r.failed) {
        ++row.seeds_failed;
        continue;
      }
      ++row.seeds_ok;
      if (std::isfinite(r.auc)) aucs.push_back(r.auc);
    }
    row.auc = detail::safe_iqm(aucs, 500 + static_cast<uint64_t>(v * 16));
    rows.push_back(row);
  }
  std::ofstream f(base.out_dir + "/scaling_" + axis + ".csv");
  f << "value,iqm_auc,auc_ci_low,auc_ci_high,seeds_ok,seeds_failed\n";
  for (const auto& r : rows)
    f << fmt17(r.value) << "," << fmt17(r.auc.iqm) << "," << fmt17(r.auc.ci_low) << ","
      << fmt17(r.auc.ci_high) << "," << r.seeds_ok << "," << r.seeds_failed << "\n";
  return rows;
}

}  // namespace xqc::cli
