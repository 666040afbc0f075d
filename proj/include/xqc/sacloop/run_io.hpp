#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "xqc/netlib/checkpoint.hpp"
#include "xqc/spectra/conditioning.hpp"
#include "xqc/spectra/plasticity.hpp"

namespace xqc::sacloop {

// Writes the fixed run-directory layout: config.txt, returns.csv, diag.csv,
// conditioning.csv, spectrum_<step>.csv, ckpt_<step>.xqc. Numbers carry 17
// significant digits so artifacts round-trip losslessly through text.
class RunWriter {
public:
  explicit RunWriter(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    returns_.open(dir_ + "/returns.csv");
    returns_ << "step,episode_return\n";
    diag_.open(dir_ + "/diag.csv");
    diag_ << "step,param_norm,grad_norm,elr,temperature,loss\n";
    if (!returns_ || !diag_) throw ConfigError("run writer: cannot create files in " + dir_);
  }

  const std::string& dir() const { return dir_; }

  void write_config(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream f(dir_ + "/config.txt");
    f << "# run configuration\n";
    for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
  }

  void append_return(long step, double episode_return) {
    returns_ << step << "," << fmt17(episode_return) << "\n";
    returns_.flush();
  }

  void append_diag(const spectra::PlasticityRecord& rec) {
    diag_ << rec.step << "," << fmt17(rec.param_norm) << "," << fmt17(rec.grad_norm) << ","
          << fmt17(rec.elr) << "," << fmt17(rec.temperature) << "," << fmt17(rec.loss) << "\n";
    diag_.flush();
  }

  void write_spectrum(long step, const spectra::SpectrumEstimate& est) {
    std::ofstream f(dir_ + "/spectrum_" + std::to_string(step) + ".csv");
    f << "ritz_value,ritz_weight\n";
    for (size_t i = 0; i < est.ritz_values.size(); ++i)
      f << fmt17(est.ritz_values[i]) << "," << fmt17(est.ritz_weights[i]) << "\n";
  }

  void append_conditioning(long step, const spectra::ConditioningSummary& s) {
    if (!conditioning_.is_open()) {
      conditioning_.open(dir_ + "/conditioning.csv");
      conditioning_ << "step,kappa,lambda_max,lambda_min_abs,kurtosis\n";
    }
    conditioning_ << step << "," << fmt17(s.kappa) << "," << fmt17(s.lambda_max) << ","
                  << fmt17(s.lambda_min_abs) << "," << fmt17(s.kurtosis) << "\n";
    conditioning_.flush();
  }

  void write_checkpoint(long step, const netlib::Checkpoint& c) {
    netlib::save_checkpoint(dir_ + "/ckpt_" + std::to_string(step) + ".xqc", c);
  }

private:
  std::string dir_;
  std::ofstream returns_, diag_, conditioning_;
};

}  // namespace xqc::sacloop
