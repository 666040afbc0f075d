#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "xqc/diffcore/graph.hpp"
#include "xqc/distcrit/losses.hpp"
#include "xqc/distcrit/support.hpp"

using namespace xqc;
using namespace xqc::distcrit;

namespace {

// Independent projection oracle: triangular-kernel overlap of each clamped
// target position with every support atom. Formulated differently from the
// floor/split implementation on purpose.
std::vector<double> projection_oracle(const std::vector<double>& tz,
                                      const std::vector<double>& w,
                                      const CategoricalSupport& s) {
  std::vector<double> out(s.m, 0.0);
  for (size_t j = 0; j < tz.size(); ++j) {
    double z = std::min(std::max(tz[j], s.v_min), s.v_max);
    for (int i = 0; i < s.m; ++i) {
      double overlap = 1.0 - std::abs(z - s.atom(i)) / s.delta();
      if (overlap > 0) out[i] += w[j] * overlap;
    }
  }
  return out;
}

CategoricalValueDistribution random_dist(int m, Rng& rng) {
  CategoricalValueDistribution d;
  d.probs.resize(m);
  double s = 0;
  for (auto& p : d.probs) {
    p = -std::log(1.0 - rng.uniform());
    s += p;
  }
  for (auto& p : d.probs) p /= s;
  return d;
}

}  // namespace

TEST_CASE("mean_value") {
  CategoricalSupport s(-5, 5, 101);
  SECTION("delta at zero") {
    CategoricalValueDistribution d;
    d.probs.assign(101, 0.0);
    d.probs[50] = 1.0;
    CHECK(mean_value(d, s) == Catch::Approx(0.0).margin(1e-15));
  }
  SECTION("uniform over a symmetric support") {
    CategoricalValueDistribution d;
    d.probs.assign(101, 1.0 / 101);
    CHECK(mean_value(d, s) == Catch::Approx(0.0).margin(1e-13));
  }
  SECTION("two-atom arithmetic") {
    CategoricalSupport s2(-1, 1, 2);
    CategoricalValueDistribution d;
    d.probs = {0.25, 0.75};
    CHECK(mean_value(d, s2) == Catch::Approx(0.5).epsilon(1e-15));
  }
}

TEST_CASE("categorical target projection") {
  SECTION("discount zero collapses to a delta at the reward atom") {
    CategoricalSupport s(-5, 5, 101);
    Rng rng(3);
    auto d = random_dist(101, rng);
    auto out = project_shifted(s, d.probs, /*r=*/0.0, /*discount=*/0.0, /*shift=*/0.3);
    double in_mass = 0;
    for (double p : d.probs) in_mass += p;
    CHECK(out.probs[50] == in_mass);  // every input atom lands exactly on 0
    for (int i = 0; i < 101; ++i)
      if (i != 50) CHECK(out.probs[i] == 0.0);
  }
  SECTION("position exactly on an atom keeps all its mass there") {
    CategoricalSupport s(-5, 5, 11);
    auto out = project_target({s.atom(7)}, {1.0}, s);
    CHECK(out.probs[7] == 1.0);
  }
  SECTION("matches the brute-force clamp-and-split oracle on random instances") {
    CategoricalSupport s(-5, 5, 11);
    double worst = 0, worst_mass = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      Rng rng(5000 + trial);
      auto d = random_dist(11, rng);
      double r = rng.uniform(-8, 8);
      double discount = rng.uniform(0, 1);
      double shift = rng.uniform(-3, 3);
      auto got = project_shifted(s, d.probs, r, discount, shift);

      std::vector<double> tz(11);
      for (int j = 0; j < 11; ++j) tz[j] = r + discount * (s.atom(j) + shift);
      auto expect = projection_oracle(tz, d.probs, s);
      for (int i = 0; i < 11; ++i)
        worst = std::max(worst, std::abs(got.probs[i] - expect[i]));

      double mass = 0;
      for (double p : got.probs) {
        CHECK(p >= 0.0);
        mass += p;
      }
      worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    }
    CHECK(worst <= 1e-12);
    CHECK(worst_mass <= 1e-12);
  }
  SECTION("mean consistency when nothing clamps") {
    double worst = 0;
    CategoricalSupport s(-5, 5, 101);
    for (int trial = 0; trial < 200; ++trial) {
      Rng rng(900 + trial);
      auto d = random_dist(101, rng);
      // keep every shifted atom strictly inside the support
      double r = rng.uniform(-0.5, 0.5);
      double discount = rng.uniform(0.0, 0.8);
      auto out = project_shifted(s, d.probs, r, discount, 0.0);
      double expect = r + discount * mean_value(d, s);
      worst = std::max(worst, std::abs(mean_value(out, s) - expect));
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("cross-entropy bellman loss") {
  SECTION("uniform against uniform is log m") {
    const int m = 101;
    std::vector<double> logits(m, 0.7);
    CategoricalValueDistribution t;
    t.probs.assign(m, 1.0 / m);
    CHECK(ce_bellman_loss(logits, t) == Catch::Approx(std::log(101.0)).epsilon(1e-12));
    CHECK(ce_bellman_loss(logits, t) == Catch::Approx(4.6151).margin(1e-4));
  }
  SECTION("gradient norm is bounded by sqrt(2) over 1e4 random pairs") {
    double worst = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      Rng rng(77000 + trial);
      std::vector<double> logits(101);
      double scale = std::pow(10.0, rng.uniform(-2, 3));
      for (auto& v : logits) v = scale * rng.normal();
      auto t = random_dist(101, rng);
      auto g = ce_bellman_grad(logits, t);
      double n = 0;
      for (double v : g) n += v * v;
      worst = std::max(worst, std::sqrt(n));
    }
    CHECK(worst <= std::sqrt(2.0) + 1e-9);
  }
  SECTION("gradient matches finite differences") {
    Rng rng(13);
    std::vector<double> logits(11);
    for (auto& v : logits) v = rng.normal(0, 2);
    auto t = random_dist(11, rng);
    auto g = ce_bellman_grad(logits, t);
    double h = 1e-5;
    std::vector<double> fd(11);
    for (int i = 0; i < 11; ++i) {
      auto lp = logits, lm = logits;
      lp[i] += h;
      lm[i] -= h;
      fd[i] = (ce_bellman_loss(lp, t) - ce_bellman_loss(lm, t)) / (2 * h);
    }
    CHECK(test::rel_err_inf(g, fd) < 1e-8);
  }
  SECTION("invariant to a constant logit shift") {
    Rng rng(14);
    std::vector<double> logits(101);
    for (auto& v : logits) v = rng.normal(0, 3);
    auto t = random_dist(101, rng);
    double base = ce_bellman_loss(logits, t);
    for (auto& v : logits) v += 123.456;
    CHECK(std::abs(ce_bellman_loss(logits, t) - base) <= 1e-10);
  }
  SECTION("agrees with the graph op") {
    Rng rng(15);
    MatD t(3, 7);
    for (int r = 0; r < 3; ++r) {
      auto d = random_dist(7, rng);
      for (int c = 0; c < 7; ++c) t.at(r, c) = d.probs[c];
    }
    auto theta = test::random_vec(21, rng, 2.0);
    diffcore::Graph<double> g(theta);
    int loss = g.ce_with_logits_mean(g.param_slice(0, 3, 7), t);
    double manual = 0;
    for (int r = 0; r < 3; ++r) {
      std::vector<double> row(theta.begin() + r * 7, theta.begin() + (r + 1) * 7);
      CategoricalValueDistribution target;
      target.probs.assign(t.data.begin() + r * 7, t.data.begin() + (r + 1) * 7);
      manual += ce_bellman_loss(row, target);
    }
    CHECK(g.scalar(loss) == Catch::Approx(manual / 3).epsilon(1e-14));
  }
  SECTION("non-finite logits raise a numeric error") {
    CategoricalValueDistribution t;
    t.probs = {0.5, 0.5};
    CHECK_THROWS_AS(ce_bellman_loss({1.0, std::nan("")}, t), NumericError);
  }
}

TEST_CASE("mse bellman loss") {
  CHECK(mse_bellman_loss(3.0, 3.0) == 0.0);
  CHECK(mse_bellman_loss(1.0, 3.0) == Catch::Approx(2.0).epsilon(1e-15));
  CHECK(mse_bellman_grad(1.0, 3.0) == Catch::Approx(-2.0).epsilon(1e-15));
  SECTION("gradient magnitude grows linearly with the error") {
    for (double c : {1.0, 10.0, 100.0}) {
      double q = 0.0;
      CHECK(std::abs(mse_bellman_grad(q, q + c)) == c);
    }
  }
}

TEST_CASE("distribution invariants") {
  CategoricalValueDistribution ok;
  ok.probs = {0.25, 0.75};
  CHECK_NOTHROW(ok.validate());
  CategoricalValueDistribution neg;
  neg.probs = {-0.1, 1.1};
  CHECK_THROWS_AS(neg.validate(), ConfigError);
  CategoricalValueDistribution off;
  off.probs = {0.6, 0.6};
  CHECK_THROWS_AS(off.validate(), ConfigError);
  CategoricalSupport bad(-5, 5, 101);
  CHECK_THROWS_AS(CategoricalSupport(0, 0, 5), ConfigError);
  CHECK_THROWS_AS(CategoricalSupport(-1, 1, 1), ConfigError);
  (void)bad;
}
