#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "xqc/diffcore/param_vector.hpp"

namespace xqc::netlib {

// On-disk snapshot: magic "XQC1", config hash, the parameter layout table,
// the flattened parameters, then named auxiliary arrays (running statistics,
// normalizer state, scalars). All reals little-endian, 64-bit by default or
// 32-bit when f32 is set.
struct Checkpoint {
  uint64_t config_hash = 0;
  diffcore::ParamVector params;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;
  bool f32 = false;

  const std::vector<double>& array(const std::string& name) const {
    for (const auto& [n, a] : arrays)
      if (n == name) return a;
    throw ConfigError("checkpoint: no array named " + name);
  }
};

namespace detail {

inline void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

template <class U>
void put_le(std::string& out, U v) {
  unsigned char b[sizeof(U)];
  for (size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(out, b, sizeof(U));
}

inline void put_f64(std::string& out, double x) {
  uint64_t u;
  std::memcpy(&u, &x, 8);
  put_le(out, u);
}

inline void put_f32(std::string& out, float x) {
  uint32_t u;
  std::memcpy(&u, &x, 4);
  put_le(out, u);
}

struct Reader {
  const std::string& buf;
  size_t at = 0;

  void need(size_t n) const {
    if (at + n > buf.size()) throw ConfigError("checkpoint: truncated file");
  }
  template <class U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
    at += sizeof(U);
    return v;
  }
  double get_f64() {
    uint64_t u = get_le<uint64_t>();
    double x;
    std::memcpy(&x, &u, 8);
    return x;
  }
  float get_f32() {
    uint32_t u = get_le<uint32_t>();
    float x;
    std::memcpy(&x, &u, 4);
    return x;
  }
  std::string get_str() {
    auto n = get_le<uint32_t>();
    need(n);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
  using namespace detail;
  std::string out;
  out += "XQC1";
  put_le<uint32_t>(out, 1);  // version
  out.push_back(c.f32 ? 4 : 8);
  put_le<uint64_t>(out, c.config_hash);
  put_le<uint32_t>(out, static_cast<uint32_t>(c.params.layout.size()));
  for (const auto& e : c.params.layout) {
    put_le<uint32_t>(out, static_cast<uint32_t>(e.name.size()));
    put_bytes(out, e.name.data(), e.name.size());
    out.push_back(static_cast<char>(e.kind));
    put_le<uint32_t>(out, static_cast<uint32_t>(e.rows));
    put_le<uint32_t>(out, static_cast<uint32_t>(e.cols));
    put_le<uint64_t>(out, e.offset);
  }
  auto put_real_vec = [&](const std::vector<double>& v) {
    put_le<uint64_t>(out, v.size());
    for (double x : v) {
      if (c.f32) put_f32(out, static_cast<float>(x));
      else put_f64(out, x);
    }
  };
  put_real_vec(c.params.values);
  put_le<uint32_t>(out, static_cast<uint32_t>(c.arrays.size()));
  for (const auto& [name, data] : c.arrays) {
    put_le<uint32_t>(out, static_cast<uint32_t>(name.size()));
    put_bytes(out, name.data(), name.size());
    put_real_vec(data);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& buf) {
  using namespace detail;
  Reader r{buf};
  r.need(4);
  if (buf.compare(0, 4, "XQC1") != 0) throw ConfigError("checkpoint: bad magic");
  r.at = 4;
  auto version = r.get_le<uint32_t>();
  if (version != 1) throw ConfigError("checkpoint: unsupported version");
  r.need(1);
  int width = static_cast<unsigned char>(buf[r.at++]);
  if (width != 4 && width != 8) throw ConfigError("checkpoint: bad real width");
  Checkpoint c;
  c.f32 = width == 4;
  c.config_hash = r.get_le<uint64_t>();
  auto n_layout = r.get_le<uint32_t>();
  for (uint32_t i = 0; i < n_layout; ++i) {
    diffcore::LayoutEntry e;
    e.name = r.get_str();
    r.need(1);
    e.kind = static_cast<diffcore::ParamKind>(static_cast<unsigned char>(buf[r.at++]));
    e.rows = static_cast<int>(r.get_le<uint32_t>());
    e.cols = static_cast<int>(r.get_le<uint32_t>());
    e.offset = r.get_le<uint64_t>();
    c.params.layout.push_back(std::move(e));
  }
  auto get_real_vec = [&](std::vector<double>& v) {
    auto n = r.get_le<uint64_t>();
    v.resize(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = c.f32 ? double(r.get_f32()) : r.get_f64();
  };
  get_real_vec(c.params.values);
  auto n_arrays = r.get_le<uint32_t>();
  for (uint32_t i = 0; i < n_arrays; ++i) {
    std::string name = r.get_str();
    std::vector<double> data;
    get_real_vec(data);
    c.arrays.emplace_back(std::move(name), std::move(data));
  }
  if (r.at != buf.size()) throw ConfigError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
  std::string buf = encode_checkpoint(c);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(buf);
}

}  // namespace xqc::netlib
