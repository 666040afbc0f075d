#pragma once

#include <string>
#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::diffcore {

enum class ParamKind : uint8_t {
  HiddenWeight = 0,  // dense weight followed by a normalization layer; projectable
  HeadWeight = 1,    // output-head weight; never projected
  Bias = 2,
  NormScale = 3,
  NormShift = 4,
};

struct LayoutEntry {
  std::string name;
  ParamKind kind = ParamKind::Bias;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;  // into ParamVector::values

  size_t count() const { return static_cast<size_t>(rows) * cols; }
};

// Flattened trainable parameters plus the layout that maps slices back to
// layers. Layout entries partition [0, values.size()) in order.
struct ParamVector {
  std::vector<double> values;
  std::vector<LayoutEntry> layout;

  size_t size() const { return values.size(); }

  void check_layout() const {
    size_t at = 0;
    for (const auto& e : layout) {
      if (e.offset != at) throw ConfigError("param layout has gap or overlap at " + e.name);
      at += e.count();
    }
    if (at != values.size()) throw ConfigError("param layout does not cover all values");
  }

  const LayoutEntry& find(const std::string& name) const {
    for (const auto& e : layout)
      if (e.name == name) return e;
    throw ConfigError("no parameter named " + name);
  }

  MatD unpack(const LayoutEntry& e) const {
    MatD m(e.rows, e.cols);
    std::copy(values.begin() + e.offset, values.begin() + e.offset + e.count(), m.data.begin());
    return m;
  }

  void pack(const LayoutEntry& e, const MatD& m) {
    if (m.rows != e.rows || m.cols != e.cols)
      throw ConfigError("pack: shape mismatch for " + e.name);
    std::copy(m.data.begin(), m.data.end(), values.begin() + e.offset);
  }

  double norm2() const {
    double s = 0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

// Appends a parameter block and returns a copy of its entry.
inline LayoutEntry append_param(ParamVector& p, std::string name, ParamKind kind, int rows,
                                int cols) {
  LayoutEntry e;
  e.name = std::move(name);
  e.kind = kind;
  e.rows = rows;
  e.cols = cols;
  e.offset = p.values.size();
  p.values.resize(p.values.size() + e.count(), 0.0);
  p.layout.push_back(e);
  return p.layout.back();
}

}  // namespace xqc::diffcore
