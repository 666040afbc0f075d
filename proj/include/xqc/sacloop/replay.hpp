#pragma once

#include <vector>

#include "xqc/core/common.hpp"
#include "xqc/core/rng.hpp"

namespace xqc::sacloop {

// One environment interaction. done marks true termination only; time-limit
// truncations keep done = false so the target still bootstraps.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0;  // raw, unnormalized
  std::vector<double> s2;
  bool done = false;
};

struct Batch {
  MatD s, a, s2;
  std::vector<double> r;
  std::vector<double> done;
  int size = 0;
};

// Ring buffer with FIFO overwrite at capacity and uniform sampling (with
// replacement) from the filled region.
class ReplayBuffer {
public:
  ReplayBuffer(size_t capacity, uint64_t seed) : capacity_(capacity), rng_(seed) {
    if (capacity_ < 1) throw ConfigError("replay: capacity must be positive");
    storage_.reserve(std::min(capacity_, size_t(1) << 20));
  }

  void push(Transition t) {
    for (double v : t.s)
      if (!std::isfinite(v)) throw NumericError("replay: non-finite observation");
    for (double v : t.a)
      if (!(std::isfinite(v) && v >= -1.0 && v <= 1.0))
        throw PreconditionError("replay: action outside [-1, 1]");
    if (!std::isfinite(t.r)) throw NumericError("replay: non-finite reward");
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  size_t size() const { return storage_.size(); }
  const Transition& at(size_t i) const { return storage_[i]; }

  size_t sample_index() { return rng_.uniform_index(storage_.size()); }

  Batch sample(int n) {
    if (storage_.empty()) throw PreconditionError("replay: sampling from empty buffer");
    const int obs = static_cast<int>(storage_[0].s.size());
    const int act = static_cast<int>(storage_[0].a.size());
    Batch b;
    b.size = n;
    b.s = MatD(n, obs);
    b.a = MatD(n, act);
    b.s2 = MatD(n, obs);
    b.r.resize(n);
    b.done.resize(n);
    for (int i = 0; i < n; ++i) {
      const Transition& t = storage_[sample_index()];
      std::copy(t.s.begin(), t.s.end(), b.s.data.begin() + static_cast<size_t>(i) * obs);
      std::copy(t.a.begin(), t.a.end(), b.a.data.begin() + static_cast<size_t>(i) * act);
      std::copy(t.s2.begin(), t.s2.end(), b.s2.data.begin() + static_cast<size_t>(i) * obs);
      b.r[i] = t.r;
      b.done[i] = t.done ? 1.0 : 0.0;
    }
    return b;
  }

private:
  size_t capacity_;
  std::vector<Transition> storage_;
  size_t next_ = 0;
  Rng rng_;
};

}  // namespace xqc::sacloop
