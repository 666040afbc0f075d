#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "xqc/diffcore/graph.hpp"
#include "xqc/diffcore/loss_function.hpp"
#include "xqc/diffcore/param_vector.hpp"

using namespace xqc;
using namespace xqc::diffcore;
using xqc::test::make_loss;

using test::NormKind;
using test::random_simplex_rows;
using test::small_net;
using test::small_net_dim;

TEST_CASE("quadratic identities") {
  MatD eye(2, 2);
  eye.at(0, 0) = eye.at(1, 1) = 1.0;
  QuadraticLoss loss(eye);
  auto vg = value_and_grad(loss, std::vector<double>{3.0, 4.0});
  CHECK(vg.value == Catch::Approx(12.5).epsilon(1e-14));
  CHECK(vg.grad[0] == Catch::Approx(3.0).epsilon(1e-14));
  CHECK(vg.grad[1] == Catch::Approx(4.0).epsilon(1e-14));

  MatD a(2, 2);
  a.at(0, 0) = 1.0;
  a.at(1, 1) = 2.0;
  HvpOracle oracle(std::make_shared<QuadraticLoss>(a), {0.7, -0.3});
  auto hv = oracle.hvp({1.0, 1.0});
  CHECK(hv[0] == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(hv[1] == Catch::Approx(2.0).epsilon(1e-14));
  auto hz = oracle.hvp({0.0, 0.0});
  CHECK(hz[0] == 0.0);
  CHECK(hz[1] == 0.0);
}

TEST_CASE("per-primitive gradients match central differences at 20 random points") {
  struct Probe {
    const char* name;
    std::function<std::shared_ptr<LossFunction>(Rng&)> make;
  };

  auto elementwise_probe = [](auto apply) {
    return [apply](Rng&) {
      return make_loss(6, [apply](auto& g) {
        int x = g.param_slice(0, 2, 3);
        return g.mean_all(apply(g, x));
      });
    };
  };

  std::vector<Probe> probes;
  probes.push_back({"linear+bias (mse)", [](Rng& rng) {
    MatD x = test::random_mat(5, 3, rng);
    MatD t = test::random_mat(5, 2, rng);
    return make_loss(small_net_dim(3, 4, 2), [x, t](auto& g) {
      return small_net(g, x, t, 3, 4, 2, NormKind::None, false);
    });
  }});
  probes.push_back({"batchnorm train (through batch stats)", [](Rng& rng) {
    MatD x = test::random_mat(6, 3, rng);
    MatD t = test::random_mat(6, 2, rng);
    return make_loss(small_net_dim(3, 4, 2), [x, t](auto& g) {
      return small_net(g, x, t, 3, 4, 2, NormKind::Bn, false);
    });
  }});
  probes.push_back({"layernorm", [](Rng& rng) {
    MatD x = test::random_mat(6, 3, rng);
    MatD t = test::random_mat(6, 2, rng);
    return make_loss(small_net_dim(3, 4, 2), [x, t](auto& g) {
      return small_net(g, x, t, 3, 4, 2, NormKind::Ln, false);
    });
  }});
  probes.push_back({"tanh body", [](Rng& rng) {
    MatD x = test::random_mat(5, 3, rng);
    MatD t = test::random_mat(5, 2, rng);
    return make_loss(small_net_dim(3, 4, 2), [x, t](auto& g) {
      return small_net(g, x, t, 3, 4, 2, NormKind::None, false, /*relu=*/false);
    });
  }});
  probes.push_back({"softmax rows", elementwise_probe([](auto& g, int x) {
    return g.mul(g.softmax_rows(x), g.softmax_rows(g.scale(x, -0.5)));
  })});
  probes.push_back({"exp/log chain", elementwise_probe([](auto& g, int x) {
    return g.log_(g.add_scalar(g.exp_(g.scale(x, 0.3)), 0.5));
  })});
  probes.push_back({"softplus", elementwise_probe([](auto& g, int x) {
    return g.softplus(g.scale(x, 2.0));
  })});
  probes.push_back({"clamp interior", elementwise_probe([](auto& g, int x) {
    return g.clamp(x, -10.0, 10.0);
  })});
  probes.push_back({"mul/sub/min_elem", elementwise_probe([](auto& g, int x) {
    int a = g.scale(x, 1.3);
    int b = g.add_scalar(x, 0.25);
    return g.mul(g.min_elem(a, b), g.sub(a, b));
  })});
  probes.push_back({"concat/slice/rowsum", elementwise_probe([](auto& g, int x) {
    int j = g.concat_rows(x, g.scale(x, -1.0));
    int s = g.slice_rows(j, 1, 2);
    int c = g.concat_cols(s, g.tanh_(s));
    return g.row_sum(c);
  })});
  probes.push_back({"ce critic loss", [](Rng& rng) {
    MatD x = test::random_mat(6, 3, rng);
    MatD t = random_simplex_rows(6, 5, rng);
    return make_loss(small_net_dim(3, 4, 5), [x, t](auto& g) {
      return small_net(g, x, t, 3, 4, 5, NormKind::Bn, true);
    });
  }});
  probes.push_back({"gaussian policy head log-prob", [](Rng& rng) {
    MatD noise = test::random_mat(5, 2, rng);
    return make_loss(5 * 2 * 2, [noise](auto& g) {
      // theta holds per-sample mean and log-std entries directly.
      int mean = g.param_slice(0, 5, 2);
      int logstd = g.clamp(g.param_slice(10, 5, 2), -10.0, 2.0);
      int std = g.exp_(logstd);
      int nc = g.constant(noise);
      int u = g.add(mean, g.mul(std, nc));
      // log pi = sum_j(-logstd - 0.5 xi^2 - 0.5 log 2pi - 2 log 2 + 2u + 2 softplus(-2u))
      int corr = g.add(g.scale(u, 2.0), g.scale(g.softplus(g.scale(u, -2.0)), 2.0));
      int lp = g.add(g.scale(logstd, -1.0), corr);
      return g.mean_all(g.row_sum(lp));
    });
  }});

  for (const auto& probe : probes) {
    INFO(probe.name);
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(900 + trial);
      auto loss = probe.make(rng);
      auto theta = test::random_vec(loss->dim(), rng, 0.7);
      auto vg = value_and_grad(*loss, theta);
      auto fd = test::fd_gradient(*loss, theta);
      worst = std::max(worst, test::rel_err_inf(vg.grad, fd));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("hvp matches finite differences of gradients on a two-layer relu net") {
  Rng rng(7);
  MatD x = test::random_mat(8, 3, rng);
  MatD t = test::random_mat(8, 2, rng);
  auto loss = make_loss(small_net_dim(3, 6, 2), [x, t](auto& g) {
    return small_net(g, x, t, 3, 6, 2, NormKind::None, false);
  });
  auto theta = test::random_vec(loss->dim(), rng, 0.8);
  HvpOracle oracle(loss, theta);
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    auto v = test::random_vec(theta.size(), rng);
    auto hv = oracle.hvp(v);
    auto fd = test::fd_hvp(*loss, theta, v, 1e-4);
    worst = std::max(worst, test::rel_err_inf(hv, fd));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("hvp symmetry and linearity") {
  Rng rng(21);
  MatD x = test::random_mat(6, 3, rng);
  MatD t = random_simplex_rows(6, 5, rng);
  auto loss = make_loss(small_net_dim(3, 4, 5), [x, t](auto& g) {
    return small_net(g, x, t, 3, 4, 5, NormKind::Bn, true);
  });
  auto theta = test::random_vec(loss->dim(), rng, 0.6);
  HvpOracle oracle(loss, theta);

  for (int trial = 0; trial < 10; ++trial) {
    auto u = test::random_vec(theta.size(), rng);
    auto v = test::random_vec(theta.size(), rng);
    auto hu = oracle.hvp(u);
    auto hv = oracle.hvp(v);
    double uhv = test::dot(u, hv), vhu = test::dot(v, hu);
    CHECK(std::abs(uhv - vhu) <= 1e-8 * std::max({std::abs(uhv), std::abs(vhu), 1e-12}));

    double alpha = 0.8, beta = -1.7;
    std::vector<double> combo(u.size());
    for (size_t i = 0; i < u.size(); ++i) combo[i] = alpha * u[i] + beta * v[i];
    auto hc = oracle.hvp(combo);
    std::vector<double> expect(u.size());
    for (size_t i = 0; i < u.size(); ++i) expect[i] = alpha * hu[i] + beta * hv[i];
    CHECK(test::rel_err_inf(hc, expect) < 1e-10);
  }
}

TEST_CASE("tape replay and repeated evaluation are bit-exact") {
  Rng rng(33);
  MatD x = test::random_mat(6, 3, rng);
  MatD t = random_simplex_rows(6, 5, rng);
  auto loss = make_loss(small_net_dim(3, 4, 5), [x, t](auto& g) {
    return small_net(g, x, t, 3, 4, 5, NormKind::Bn, true);
  });
  auto theta = test::random_vec(loss->dim(), rng, 0.5);

  Graph<double> g(theta);
  int lv = loss->build(g);
  double first = g.scalar(lv);
  g.replay();
  CHECK(g.scalar(lv) == first);

  auto vg1 = value_and_grad(*loss, theta);
  auto vg2 = value_and_grad(*loss, theta);
  CHECK(vg1.value == vg2.value);
  CHECK(vg1.grad == vg2.grad);

  HvpOracle oracle(loss, theta);
  auto v = test::random_vec(theta.size(), rng);
  CHECK(oracle.hvp(v) == oracle.hvp(v));
}

TEST_CASE("dense hessian oracle") {
  SECTION("quadratic recovers A") {
    Rng rng(4);
    MatD a(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j <= i; ++j) a.at(i, j) = a.at(j, i) = rng.normal();
    HvpOracle oracle(std::make_shared<QuadraticLoss>(a), test::random_vec(5, rng));
    MatD h = dense_hessian(oracle);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) CHECK(h.at(i, j) == Catch::Approx(a.at(i, j)).margin(1e-12));
  }
  SECTION("constant loss gives the zero matrix") {
    auto loss = make_loss(4, [](auto& g) {
      MatD c(1, 1);
      c.at(0, 0) = 3.25;
      return g.mean_all(g.constant(c));
    });
    HvpOracle oracle(loss, std::vector<double>(4, 1.0));
    MatD h = dense_hessian(oracle);
    for (double v : h.data) CHECK(v == 0.0);
  }
  SECTION("dimension above the cap is refused") {
    MatD a(3, 3);
    a.at(0, 0) = a.at(1, 1) = a.at(2, 2) = 1.0;
    HvpOracle oracle(std::make_shared<QuadraticLoss>(a), {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(dense_hessian(oracle, 2), PreconditionError);
  }
}

TEST_CASE("relu subgradient at zero is zero") {
  auto loss = make_loss(1, [](auto& g) {
    return g.mean_all(g.relu(g.param_slice(0, 1, 1)));
  });
  auto vg = value_and_grad(*loss, std::vector<double>{0.0});
  CHECK(vg.grad[0] == 0.0);
}

TEST_CASE("error paths") {
  SECTION("theta length mismatch is a configuration error") {
    MatD a(2, 2);
    a.at(0, 0) = a.at(1, 1) = 1.0;
    QuadraticLoss loss(a);
    CHECK_THROWS_AS(value_and_grad(loss, std::vector<double>{1.0, 2.0, 3.0}), ConfigError);
  }
  SECTION("batchnorm in train mode rejects batch of one") {
    Graph<double> g(std::vector<double>{1.0, 0.0});
    MatD x(1, 1);
    x.at(0, 0) = 2.0;
    int xc = g.constant(x);
    int gamma = g.param_slice(0, 1, 1);
    int beta = g.param_slice(1, 1, 1);
    CHECK_THROWS_AS(g.batchnorm_train(xc, gamma, beta, 1e-5), PreconditionError);
  }
  SECTION("exp overflow names the offending node") {
    auto loss = make_loss(1, [](auto& g) {
      return g.mean_all(g.exp_(g.scale(g.param_slice(0, 1, 1), 1000.0)));
    });
    try {
      value_and_grad(*loss, std::vector<double>{5.0});
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("exp") != std::string::npos);
      CHECK(std::string(e.what()).find("node") != std::string::npos);
    }
  }
}

TEST_CASE("param vector layout and round trip") {
  ParamVector p;
  const auto w = append_param(p, "layer/W", ParamKind::HiddenWeight, 3, 2);
  const auto b = append_param(p, "layer/b", ParamKind::Bias, 1, 3);
  p.check_layout();
  CHECK(p.size() == 9);
  CHECK(w.offset == 0);
  CHECK(b.offset == 6);

  Rng rng(11);
  for (auto& v : p.values) v = rng.normal();
  MatD wm = p.unpack(w);
  MatD bm = p.unpack(b);
  ParamVector q = p;
  std::fill(q.values.begin(), q.values.end(), 0.0);
  q.pack(w, wm);
  q.pack(b, bm);
  CHECK(q.values == p.values);

  ParamVector bad = p;
  bad.layout[1].offset = 5;
  CHECK_THROWS_AS(bad.check_layout(), ConfigError);
}
