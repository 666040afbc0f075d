#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xqc/netlib/config.hpp"
#include "xqc/sacloop/trainer.hpp"

namespace xqc::cli {

// Flat key=value file with '#' comments.
class KvFile {
public:
  static KvFile parse(const std::string& text) {
    KvFile kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto strip = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = strip(line);
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("plan line " + std::to_string(lineno) + ": expected key=value");
      std::string key = strip(line.substr(0, eq));
      std::string value = strip(line.substr(eq + 1));
      if (key.empty()) throw ConfigError("plan line " + std::to_string(lineno) + ": empty key");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KvFile load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open plan file: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(text);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  long get_long(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stol(it->second);
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : std::stod(it->second);
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream is(it->second);
    std::string tok;
    while (std::getline(is, tok, ',')) {
      size_t a = tok.find_first_not_of(" \t");
      size_t b = tok.find_last_not_of(" \t");
      if (a != std::string::npos) out.push_back(tok.substr(a, b - a + 1));
    }
    return out;
  }

private:
  std::map<std::string, std::string> values_;
};

inline std::vector<netlib::ArchitectureConfig> all_cells(netlib::ArchitectureConfig base) {
  std::vector<netlib::ArchitectureConfig> cells;
  for (auto norm : {netlib::Norm::BN, netlib::Norm::LN, netlib::Norm::None})
    for (bool wn : {true, false})
      for (auto loss : {netlib::CriticLoss::CE, netlib::CriticLoss::MSE}) {
        auto c = base;
        c.norm = norm;
        c.weight_projection = wn;
        c.critic_loss = loss;
        cells.push_back(c);
      }
  return cells;
}

// A (task, cells, seeds, schedule) bundle fully determining a batch of runs.
struct ExperimentPlan {
  std::string task = "pendulum";
  std::vector<netlib::ArchitectureConfig> cells;
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  long total_steps = 30000;
  long probe_every = 250;
  int spectrum_count = 10;
  int lanczos_steps = 64;
  int lanczos_probes = 8;
  std::string out_dir = "runs";
  sacloop::TrainerConfig trainer;

  void validate() const {
    if (cells.empty()) throw ConfigError("plan: no cells");
    for (size_t i = 0; i < seeds.size(); ++i)
      for (size_t j = i + 1; j < seeds.size(); ++j)
        if (seeds[i] == seeds[j]) throw ConfigError("plan: duplicate seed");
    if (total_steps < 0) throw ConfigError("plan: negative steps");
  }

  std::vector<long> probe_schedule() const {
    std::vector<long> out;
    if (total_steps == 0) return out;
    for (long s = probe_every; s <= total_steps; s += probe_every) out.push_back(s);
    if (out.empty() || out.back() != total_steps) out.push_back(total_steps);
    return out;
  }

  std::vector<long> spectrum_schedule() const {
    std::vector<long> out;
    if (spectrum_count <= 0) return out;
    if (total_steps == 0) return {0};  // init-checkpoint spectrum only
    for (int i = 1; i <= spectrum_count; ++i)
      out.push_back(total_steps * static_cast<long>(i) / spectrum_count);
    return out;
  }

  static ExperimentPlan from_kv(const KvFile& kv) {
    ExperimentPlan plan;
    plan.task = kv.get("task", plan.task);
    netlib::ArchitectureConfig base;
    base.hidden_dim = static_cast<int>(kv.get_long("hidden", 32));
    base.num_blocks = static_cast<int>(kv.get_long("blocks", 2));
    base.atoms = static_cast<int>(kv.get_long("atoms", 101));
    std::string cells = kv.get("cells", "bn+wn+ce");
    if (cells == "all") {
      plan.cells = all_cells(base);
    } else {
      std::istringstream is(cells);
      std::string tok;
      while (std::getline(is, tok, ';')) {
        size_t a = tok.find_first_not_of(" \t");
        size_t b = tok.find_last_not_of(" \t");
        if (a != std::string::npos) plan.cells.push_back(netlib::parse_cell(tok.substr(a, b - a + 1), base));
      }
    }
    if (kv.has("seeds")) {
      plan.seeds.clear();
      for (const auto& s : kv.get_list("seeds")) plan.seeds.push_back(std::stoull(s));
    }
    plan.total_steps = kv.get_long("steps", plan.total_steps);
    plan.probe_every = kv.get_long("probe_every", plan.probe_every);
    plan.spectrum_count = static_cast<int>(kv.get_long("spectra", plan.spectrum_count));
    plan.lanczos_steps = static_cast<int>(kv.get_long("lanczos_m", plan.lanczos_steps));
    plan.lanczos_probes = static_cast<int>(kv.get_long("lanczos_k", plan.lanczos_probes));
    plan.out_dir = kv.get("out", plan.out_dir);
    plan.trainer.utd = static_cast<int>(kv.get_long("utd", plan.trainer.utd));
    plan.trainer.batch_size = static_cast<int>(kv.get_long("batch", plan.trainer.batch_size));
    plan.trainer.warmup_steps =
        static_cast<int>(kv.get_long("warmup", plan.trainer.warmup_steps));
    plan.trainer.critic_lr = kv.get_double("critic_lr", plan.trainer.critic_lr);
    plan.trainer.actor_lr = kv.get_double("actor_lr", plan.trainer.actor_lr);
    plan.trainer.temp_lr = kv.get_double("temp_lr", plan.trainer.temp_lr);
    plan.trainer.use_target_networks = kv.get_long("target_networks", 1) != 0;
    plan.trainer.joint_forward = kv.get_long("joint_forward", 1) != 0;
    plan.trainer.lr_schedule = kv.get_long("lr_schedule", 1) != 0;
    plan.trainer.f32 = kv.get_long("f32", 0) != 0;
    if (kv.has("discount")) plan.trainer.discount = kv.get_double("discount", 0.99);
    plan.validate();
    return plan;
  }
};

// Cell directory tag: '+' is awkward in shells, so cells use '-' on disk.
inline std::string cell_dir_name(const netlib::ArchitectureConfig& cfg) {
  std::string s = cfg.cell_name();
  for (char& c : s)
    if (c == '+') c = '-';
  return s;
}

}  // namespace xqc::cli
