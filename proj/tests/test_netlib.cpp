#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"
#include "xqc/netlib/checkpoint.hpp"
#include "xqc/netlib/network.hpp"

using namespace xqc;
using namespace xqc::netlib;

namespace {

ArchitectureConfig small_cfg(Norm norm, CriticLoss loss, int hidden = 8, int blocks = 2,
                             int atoms = 11) {
  ArchitectureConfig cfg;
  cfg.norm = norm;
  cfg.critic_loss = loss;
  cfg.hidden_dim = hidden;
  cfg.num_blocks = blocks;
  cfg.atoms = atoms;
  return cfg;
}

void scale_layer(diffcore::ParamVector& theta, const std::string& block_prefix, double lambda) {
  for (const auto& e : theta.layout) {
    if (e.name == block_prefix + "/W" || e.name == block_prefix + "/b") {
      for (size_t i = 0; i < e.count(); ++i) theta.values[e.offset + i] *= lambda;
    }
  }
}

double max_abs_diff(const MatD& a, const MatD& b) {
  double d = 0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

}  // namespace

TEST_CASE("build: parameter counts, output widths, determinism") {
  SECTION("dense mse cell has the hand-counted size") {
    auto cfg = small_cfg(Norm::None, CriticLoss::MSE, 8, 1);
    auto built = build_networks(cfg, 2, 1, 0);
    CHECK(built.critic_param_count == 41);  // (3*8+8) + (8*1+1)
    CHECK(built.critic_span == 82);
  }
  SECTION("categorical critic emits one logit per atom") {
    ArchitectureConfig cfg;  // bn+wn+ce, 512x4, 101 atoms
    auto built = build_networks(cfg, 5, 3, 1);
    Rng rng(2);
    MatD sa = test::random_mat(4, 8, rng);
    MatD out = critic_forward(built.critic[0], built.params, sa, Mode::Eval);
    CHECK(out.rows == 4);
    CHECK(out.cols == 101);
    for (double v : out.data) CHECK(std::isfinite(v));
  }
  SECTION("same seed gives identical parameters, different seed differs") {
    auto cfg = small_cfg(Norm::BN, CriticLoss::CE);
    auto a = build_networks(cfg, 3, 2, 42);
    auto b = build_networks(cfg, 3, 2, 42);
    auto c = build_networks(cfg, 3, 2, 43);
    CHECK(a.params.values == b.params.values);
    CHECK(a.params.values != c.params.values);
  }
  SECTION("config invariants") {
    auto cfg = small_cfg(Norm::BN, CriticLoss::CE);
    cfg.atoms = 1;
    CHECK_THROWS_AS(build_networks(cfg, 3, 2, 0), ConfigError);
    cfg = small_cfg(Norm::BN, CriticLoss::CE);
    cfg.v_min = cfg.v_max = 2.0;
    CHECK_THROWS_AS(build_networks(cfg, 3, 2, 0), ConfigError);
    cfg = small_cfg(Norm::BN, CriticLoss::CE);
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(build_networks(cfg, 3, 2, 0), ConfigError);
  }
}

TEST_CASE("batchnorm standardizes within the batch and converges its running stats") {
  SECTION("train-mode output has zero mean, unit variance per feature") {
    Rng rng(5);
    MatD x = test::random_mat(64, 6, rng, 3.0);
    std::vector<double> theta(12, 0.0);
    for (int i = 0; i < 6; ++i) theta[i] = 1.0;  // scale=1, shift=0
    diffcore::Graph<double> g(theta);
    auto h = g.batchnorm_train(g.constant(x), g.param_slice(0, 1, 6), g.param_slice(6, 1, 6),
                               1e-5);
    const auto& y = g.val(h.var);
    for (int c = 0; c < 6; ++c) {
      double mu = 0, var = 0;
      for (int r = 0; r < 64; ++r) mu += y.at(r, c);
      mu /= 64;
      for (int r = 0; r < 64; ++r) var += (y.at(r, c) - mu) * (y.at(r, c) - mu);
      var /= 64;
      CHECK(std::abs(mu) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-5);
    }
  }
  SECTION("running statistics approach a repeated batch geometrically") {
    auto cfg = small_cfg(Norm::BN, CriticLoss::MSE, 8, 1);
    auto built = build_networks(cfg, 3, 1, 7);
    Rng rng(8);
    MatD sa = test::random_mat(32, 4, rng, 2.0);
    CriticNetwork& net = built.critic[0];

    critic_forward(net, built.params, sa, Mode::Train);
    MatD batch_stats = net.norm_state.stats[0];  // after one update
    // Recover the batch statistics the update moved toward.
    double m = cfg.bn_momentum;
    MatD target(2, 4);
    MatD init = NormStates::fresh(4);
    for (int i = 0; i < 2 * 4; ++i)
      target.data[i] = (batch_stats.data[i] - (1 - m) * init.data[i]) / m;

    double prev_err = 0;
    for (int i = 0; i < 2 * 4; ++i)
      prev_err = std::max(prev_err, std::abs(net.norm_state.stats[0].data[i] - target.data[i]));
    for (int step = 0; step < 5; ++step) {
      critic_forward(net, built.params, sa, Mode::Train);
      double err = 0;
      for (int i = 0; i < 2 * 4; ++i)
        err = std::max(err, std::abs(net.norm_state.stats[0].data[i] - target.data[i]));
      CHECK(err == Catch::Approx(prev_err * (1 - m)).epsilon(1e-6));
      prev_err = err;
    }
  }
  SECTION("train mode requires batch size of at least two") {
    auto cfg = small_cfg(Norm::BN, CriticLoss::MSE);
    auto built = build_networks(cfg, 3, 1, 7);
    MatD sa(1, 4, 0.5);
    CHECK_THROWS_AS(critic_forward(built.critic[0], built.params, sa, Mode::Train),
                    PreconditionError);
  }
}

TEST_CASE("scale invariance of normalized bodies in train mode") {
  Rng rng(17);
  const int obs = 3, act = 2;
  MatD sa = test::random_mat(16, obs + act, rng);

  auto run = [&](Norm norm, double lambda, int block) {
    auto cfg = small_cfg(norm, CriticLoss::CE, 8, 2);
    auto built = build_networks(cfg, obs, act, 11);
    MatD base = critic_forward(built.critic[0], built.params, sa, Mode::Train);
    scale_layer(built.params, "critic0/block" + std::to_string(block), lambda);
    MatD scaled = critic_forward(built.critic[0], built.params, sa, Mode::Train);
    return max_abs_diff(base, scaled);
  };

  for (double lambda : {0.5, 2.0, 10.0}) {
    for (int block : {0, 1}) {
      CHECK(run(Norm::BN, lambda, block) <= 1e-5);
      CHECK(run(Norm::LN, lambda, block) <= 1e-5);
      CHECK(run(Norm::None, lambda, block) > 1e-3);  // no normalization, not invariant
    }
  }
}

TEST_CASE("weight projection") {
  auto cfg = small_cfg(Norm::BN, CriticLoss::CE, 8, 2);
  auto built = build_networks(cfg, 3, 2, 3);

  SECTION("projects every hidden matrix to unit frobenius norm") {
    for (auto& v : built.params.values) v *= 5.0;
    project_weights(built.params);
    for (const auto& [name, norm] : projected_norms(built.params)) {
      INFO(name);
      CHECK(std::abs(norm - 1.0) <= 1e-12);
    }
    // heads were not touched
    const auto& head = built.params.find("critic0/head/W");
    double head_norm = 0;
    for (size_t i = 0; i < head.count(); ++i) {
      double v = built.params.values[head.offset + i];
      head_norm += v * v;
    }
    CHECK(std::sqrt(head_norm) != Catch::Approx(1.0).margin(1e-3));
  }
  SECTION("idempotent at the bit level") {
    project_weights(built.params);
    auto once = built.params.values;
    project_weights(built.params);
    CHECK(built.params.values == once);
  }
  SECTION("per-row projection normalizes rows") {
    project_weights(built.params, /*per_row=*/true);
    const auto& w = built.params.find("critic0/block0/W");
    for (int r = 0; r < w.rows; ++r) {
      double s = 0;
      for (int c = 0; c < w.cols; ++c) {
        double v = built.params.values[w.offset + static_cast<size_t>(r) * w.cols + c];
        s += v * v;
      }
      CHECK(std::sqrt(s) == Catch::Approx(1.0).margin(1e-12));
    }
  }
  SECTION("zero-norm matrix is a degenerate-weight error") {
    const auto& w = built.params.find("critic0/block0/W");
    for (size_t i = 0; i < w.count(); ++i) built.params.values[w.offset + i] = 0.0;
    CHECK_THROWS_AS(project_weights(built.params), NumericError);
  }
}

TEST_CASE("actor heads") {
  auto cfg = small_cfg(Norm::BN, CriticLoss::CE, 8, 2);
  auto built = build_networks(cfg, 3, 2, 9);
  Rng rng(4);
  MatD s = test::random_mat(8, 3, rng);

  SECTION("log-std output is clamped into [-10, 2]") {
    const auto& w = built.params.find("actor/logstd_head/W");
    for (size_t i = 0; i < w.count(); ++i)
      built.params.values[w.offset + i] = (i % 2 == 0) ? 50.0 : -50.0;
    auto [mean, log_std] = actor_forward(built.actor, built.params, s, Mode::Eval);
    (void)mean;
    for (double v : log_std.data) {
      CHECK(v >= kLogStdMin);
      CHECK(v <= kLogStdMax);
    }
  }
  SECTION("zero mean head gives a zero mean vector") {
    const auto& w = built.params.find("actor/mean_head/W");
    for (size_t i = 0; i < w.count(); ++i) built.params.values[w.offset + i] = 0.0;
    auto [mean, log_std] = actor_forward(built.actor, built.params, s, Mode::Eval);
    (void)log_std;
    for (double v : mean.data) CHECK(v == 0.0);
  }
  SECTION("eval forwards are bit-deterministic") {
    auto a = actor_forward(built.actor, built.params, s, Mode::Eval);
    auto b = actor_forward(built.actor, built.params, s, Mode::Eval);
    CHECK(a.first.data == b.first.data);
    CHECK(a.second.data == b.second.data);
  }
}

TEST_CASE("dense variant ignores the mode flag") {
  auto cfg = small_cfg(Norm::None, CriticLoss::MSE, 8, 2);
  auto built = build_networks(cfg, 3, 1, 5);
  Rng rng(6);
  MatD sa = test::random_mat(8, 4, rng);
  MatD train = critic_forward(built.critic[0], built.params, sa, Mode::Train);
  MatD eval = critic_forward(built.critic[0], built.params, sa, Mode::Eval);
  CHECK(train.data == eval.data);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  auto cfg = small_cfg(Norm::BN, CriticLoss::CE, 8, 2);
  auto built = build_networks(cfg, 3, 2, 21);

  Checkpoint c;
  c.config_hash = config_hash(cfg, 3, 2);
  c.params = built.params;
  c.arrays.emplace_back("critic0/bn0", built.critic[0].norm_state.stats[0].data);
  Rng rng(1);
  c.arrays.emplace_back("misc", test::random_vec(7, rng));

  std::string path = "ckpt_test.xqc";
  save_checkpoint(path, c);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.config_hash == c.config_hash);
  CHECK(back.params.values == c.params.values);
  CHECK(back.params.layout.size() == c.params.layout.size());
  for (size_t i = 0; i < c.params.layout.size(); ++i) {
    CHECK(back.params.layout[i].name == c.params.layout[i].name);
    CHECK(back.params.layout[i].offset == c.params.layout[i].offset);
  }
  CHECK(back.array("misc") == c.array("misc"));
  CHECK(encode_checkpoint(back) == encode_checkpoint(c));
  std::remove(path.c_str());

  SECTION("32-bit checkpoints round trip their own width") {
    Checkpoint half = c;
    half.f32 = true;
    std::string buf = encode_checkpoint(half);
    Checkpoint again = decode_checkpoint(buf);
    CHECK(encode_checkpoint(again) == buf);
  }
}

TEST_CASE("cell parsing") {
  auto cfg = parse_cell("ln,nown,mse");
  CHECK(cfg.norm == Norm::LN);
  CHECK_FALSE(cfg.weight_projection);
  CHECK(cfg.critic_loss == CriticLoss::MSE);
  CHECK(cfg.cell_name() == "ln+nown+mse");
  auto cfg2 = parse_cell("bn+wn+ce");
  CHECK(cfg2.cell_name() == "bn+wn+ce");
  CHECK_THROWS_AS(parse_cell("bn,banana"), ConfigError);
}
