#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>

#include "xqc/cli/svg.hpp"

namespace xqc::cli {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline std::optional<CsvTable> read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream is(line);
    std::string tok;
    while (std::getline(is, tok, ',')) fields.push_back(tok);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      std::vector<double> row;
      for (const auto& s : fields) {
        try {
          row.push_back(std::stod(s));
        } catch (...) {
          row.push_back(std::nan(""));
        }
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

namespace detail {

inline Series series_from(const CsvTable& t, const std::string& xcol, const std::string& ycol,
                          const std::string& label, const std::string& color) {
  Series s;
  s.label = label;
  s.color = color;
  int xi = t.column(xcol), yi = t.column(ycol);
  if (xi < 0 || yi < 0) return s;
  for (const auto& row : t.rows)
    if (std::isfinite(row[xi]) && std::isfinite(row[yi])) s.points.emplace_back(row[xi], row[yi]);
  return s;
}

// Three stacked panels sharing the x axis: parameter norm, gradient norm,
// effective learning rate.
inline std::string plasticity_svg(const CsvTable& diag) {
  SvgCanvas svg(560, 740);
  const char* cols[3] = {"param_norm", "grad_norm", "elr"};
  const char* titles[3] = {"parameter norm", "gradient norm", "effective learning rate"};
  for (int p = 0; p < 3; ++p) {
    Series s = series_from(diag, "step", cols[p], "", "#3366bb");
    double y0 = 30 + p * 236, y1 = y0 + 200;
    AxisBox box = fit_axes(svg, 64, y0, 544, y1, {s}, titles[p], /*log_y=*/p > 0);
    std::vector<std::pair<double, double>> px;
    for (auto [x, y] : s.points) {
      if (p > 0 && !(y > 0)) continue;
      px.emplace_back(box.px(x), box.py(p > 0 ? std::log10(y) : y));
    }
    svg.polyline(px, "#3366bb");
  }
  return svg.render();
}

}  // namespace detail

// Renders every plot the artifacts in `dir` support: per-run returns,
// plasticity panels and spectrum strips, plus the matrix scatter when a
// summary file is present. Missing inputs skip that plot with a warning.
// Returns the list of files written (also saved to report_index.txt).
inline std::vector<std::string> render_reports(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  if (!fs::exists(dir)) {
    std::fprintf(stderr, "report: directory %s does not exist\n", dir.c_str());
    return written;
  }

  std::vector<std::string> run_dirs;
  std::vector<std::string> summary_files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name == "returns.csv") run_dirs.push_back(entry.path().parent_path().string());
    if (name == "matrix_summary.csv") summary_files.push_back(entry.path().string());
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  std::sort(summary_files.begin(), summary_files.end());
  if (run_dirs.empty() && summary_files.empty())
    std::fprintf(stderr, "report: no run artifacts under %s\n", dir.c_str());

  for (const std::string& rd : run_dirs) {
    if (auto returns = read_csv(rd + "/returns.csv"); returns && !returns->rows.empty()) {
      Series s = detail::series_from(*returns, "step", "episode_return", "", "#3366bb");
      write_text_file(rd + "/returns.svg", line_plot_svg("episode return", {s}));
      written.push_back(rd + "/returns.svg");
    } else {
      std::fprintf(stderr, "report: skipping returns plot in %s\n", rd.c_str());
    }
    if (auto diag = read_csv(rd + "/diag.csv"); diag && !diag->rows.empty()) {
      write_text_file(rd + "/plasticity.svg", detail::plasticity_svg(*diag));
      written.push_back(rd + "/plasticity.svg");
    } else {
      std::fprintf(stderr, "report: skipping plasticity plot in %s\n", rd.c_str());
    }
    std::vector<std::pair<double, std::vector<double>>> cols;
    std::vector<std::string> spectra;
    for (const auto& entry : fs::directory_iterator(rd)) {
      std::string name = entry.path().filename().string();
      if (name.rfind("spectrum_", 0) == 0 && entry.path().extension() == ".csv")
        spectra.push_back(entry.path().string());
    }
    std::sort(spectra.begin(), spectra.end());
    for (const auto& path : spectra) {
      auto t = read_csv(path);
      if (!t) continue;
      std::string stem = fs::path(path).stem().string();  // spectrum_<step>
      double step = std::stod(stem.substr(9));
      std::vector<double> values;
      int vi = t->column("ritz_value");
      for (const auto& row : t->rows) values.push_back(row[vi]);
      cols.emplace_back(step, std::move(values));
    }
    if (!cols.empty()) {
      std::sort(cols.begin(), cols.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      write_text_file(rd + "/spectra.svg", strip_plot_svg("critic hessian ritz values", cols));
      written.push_back(rd + "/spectra.svg");
    }
  }

  for (const std::string& path : summary_files) {
    auto t = read_csv(path);
    if (!t || t->rows.empty()) continue;
    // cell labels live in the first (non-numeric) column; reread names
    std::ifstream f(path);
    std::string line;
    std::getline(f, line);
    std::vector<Series> series;
    int row_i = 0;
    int ki = t->column("iqm_kappa"), ri = t->column("iqm_return");
    while (std::getline(f, line)) {
      auto comma = line.find(',');
      std::string cell = line.substr(0, comma);
      if (row_i < static_cast<int>(t->rows.size()) && ki >= 0 && ri >= 0) {
        double k = t->rows[row_i][ki], r = t->rows[row_i][ri];
        if (std::isfinite(k) && std::isfinite(r)) {
          Series s;
          s.label = cell;
          s.color = cell_color(cell);
          s.points.emplace_back(k, r);
          series.push_back(std::move(s));
        }
      }
      ++row_i;
    }
    std::string out = fs::path(path).parent_path().string() + "/kappa_vs_return.svg";
    write_text_file(out, scatter_plot_svg("condition number vs normalized return", series,
                                          /*log_x=*/true));
    written.push_back(out);
  }

  std::sort(written.begin(), written.end());
  std::string index;
  for (const auto& w : written) index += w + "\n";
  write_text_file(dir + "/report_index.txt", index);
  return written;
}

}  // namespace xqc::cli
