#pragma once

#include <string>
#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::spectra {

// Named contiguous slice of a flattened parameter vector.
struct LayerSpan {
  std::string name;
  size_t offset = 0;
  size_t count = 0;
};

// Plasticity snapshot at one training step: parameter and gradient scale plus
// the effective learning rate lr / ||theta||.
struct PlasticityRecord {
  long step = 0;
  double param_norm = 0;      // whole critic parameter vector
  double projected_norm = 0;  // concatenated projected weight matrices
  double grad_norm = 0;
  double elr = 0;
  double temperature = 0;
  double loss = 0;
};

inline PlasticityRecord plasticity_probe(long step, const std::vector<double>& critic_theta,
                                         const std::vector<LayerSpan>& projected_layers,
                                         const std::vector<double>& critic_grad, double lr_now,
                                         double temperature, double loss) {
  PlasticityRecord rec;
  rec.step = step;
  double s = 0;
  for (double v : critic_theta) s += v * v;
  rec.param_norm = std::sqrt(s);
  s = 0;
  for (const auto& layer : projected_layers)
    for (size_t i = 0; i < layer.count; ++i) {
      double v = critic_theta[layer.offset + i];
      s += v * v;
    }
  rec.projected_norm = std::sqrt(s);
  s = 0;
  for (double v : critic_grad) s += v * v;
  rec.grad_norm = std::sqrt(s);
  rec.elr = rec.param_norm > 0 ? lr_now / rec.param_norm : 0.0;
  rec.temperature = temperature;
  rec.loss = loss;
  for (double v : {rec.param_norm, rec.projected_norm, rec.grad_norm, rec.elr, rec.temperature})
    if (!(std::isfinite(v) && v >= 0)) throw NumericError("plasticity record: bad value");
  if (!std::isfinite(rec.loss)) throw NumericError("plasticity record: non-finite loss");
  return rec;
}

}  // namespace xqc::spectra
