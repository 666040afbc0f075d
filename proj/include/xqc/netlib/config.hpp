#pragma once

#include <sstream>
#include <string>

#include "xqc/core/common.hpp"

namespace xqc::netlib {

enum class Norm : uint8_t { BN = 0, LN = 1, None = 2 };
enum class CriticLoss : uint8_t { CE = 0, MSE = 1 };

inline const char* to_string(Norm n) {
  switch (n) {
    case Norm::BN: return "bn";
    case Norm::LN: return "ln";
    case Norm::None: return "dense";
  }
  return "?";
}

inline const char* to_string(CriticLoss l) { return l == CriticLoss::CE ? "ce" : "mse"; }

// One cell of the {BN, LN, Dense} x {WN, no WN} x {CE, MSE} matrix plus the
// width/depth and categorical-support settings that fully determine network
// construction.
struct ArchitectureConfig {
  Norm norm = Norm::BN;
  bool weight_projection = true;
  CriticLoss critic_loss = CriticLoss::CE;
  int hidden_dim = 512;
  int num_blocks = 4;
  int atoms = 101;
  double v_min = -5.0;
  double v_max = 5.0;
  double bn_momentum = 0.01;
  double norm_eps = 1e-5;
  bool per_row_projection = false;  // alternative to whole-matrix projection
  bool actor_input_norm = true;     // apply the input norm layer to the actor too

  void validate() const {
    if (hidden_dim < 1 || num_blocks < 1)
      throw ConfigError("architecture: hidden_dim and num_blocks must be >= 1");
    if (critic_loss == CriticLoss::CE) {
      if (atoms < 2) throw ConfigError("architecture: categorical critic needs atoms >= 2");
      if (!(v_min < v_max)) throw ConfigError("architecture: support requires v_min < v_max");
    }
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0))
      throw ConfigError("architecture: bn_momentum must be in (0, 1]");
  }

  // Short cell tag, e.g. "bn+wn+ce".
  std::string cell_name() const {
    std::string s = to_string(norm);
    s += weight_projection ? "+wn" : "+nown";
    s += "+";
    s += to_string(critic_loss);
    return s;
  }

  std::string canonical_string() const {
    std::ostringstream os;
    os << "norm=" << to_string(norm) << ";wn=" << (weight_projection ? 1 : 0)
       << ";loss=" << to_string(critic_loss) << ";hidden=" << hidden_dim
       << ";blocks=" << num_blocks << ";atoms=" << atoms << ";vmin=" << fmt17(v_min)
       << ";vmax=" << fmt17(v_max) << ";bn_momentum=" << fmt17(bn_momentum)
       << ";eps=" << fmt17(norm_eps) << ";per_row=" << (per_row_projection ? 1 : 0)
       << ";actor_in_norm=" << (actor_input_norm ? 1 : 0);
    return os.str();
  }
};

// Parses "bn,wn,ce" / "ln,nown,mse" / "dense,wn,ce" (comma or plus separated).
inline ArchitectureConfig parse_cell(const std::string& spec, ArchitectureConfig base = {}) {
  ArchitectureConfig cfg = base;
  std::string token;
  std::istringstream is(spec);
  int seen = 0;
  auto take = [&](const std::string& t) {
    if (t == "bn") cfg.norm = Norm::BN;
    else if (t == "ln") cfg.norm = Norm::LN;
    else if (t == "dense" || t == "none") cfg.norm = Norm::None;
    else if (t == "wn") cfg.weight_projection = true;
    else if (t == "nown" || t == "no-wn") cfg.weight_projection = false;
    else if (t == "ce") cfg.critic_loss = CriticLoss::CE;
    else if (t == "mse") cfg.critic_loss = CriticLoss::MSE;
    else throw ConfigError("unknown architecture token: " + t);
    ++seen;
  };
  std::string norm_spec = spec;
  for (char& ch : norm_spec)
    if (ch == '+') ch = ',';
  std::istringstream is2(norm_spec);
  while (std::getline(is2, token, ',')) {
    if (!token.empty()) take(token);
  }
  if (seen == 0) throw ConfigError("empty architecture spec");
  return cfg;
}

inline uint64_t config_hash(const ArchitectureConfig& cfg, int obs_dim, int act_dim) {
  std::string s = cfg.canonical_string() + ";obs=" + std::to_string(obs_dim) +
                  ";act=" + std::to_string(act_dim);
  return fnv1a64(s);
}

}  // namespace xqc::netlib
