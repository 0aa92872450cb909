#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"
#include "avsd/optim.hpp"

using namespace avsd;
using namespace avsd::opt;
using text::TokenIds;

namespace {

dec::DecoderConfig desk_config() {
  dec::DecoderConfig c;
  c.vocab_size = 40;
  c.feature_width = 16;
  c.max_positions = 64;
  return c;
}

// Eight dialogs with distinct features, questions and answers.
struct ProbeSet {
  std::vector<dec::DialogContext> contexts;
  std::vector<dec::Example> examples;
};

ProbeSet probe_set(std::size_t n = 8) {
  ProbeSet s;
  Rng rng(99);
  for (std::size_t k = 0; k < n; ++k) {
    dec::DialogContext ctx;
    ctx.video.frames = 4;
    ctx.video.width = 16;
    for (int i = 0; i < 64; ++i) ctx.video.values.push_back(static_cast<float>(rng.normal()));
    ctx.history.push_back({{static_cast<int>(10 + k), 11}, {12, 13}});
    ctx.question = {static_cast<int>(20 + k), 14, 15};
    s.contexts.push_back(ctx);
  }
  for (std::size_t k = 0; k < n; ++k) {
    TokenIds r;
    for (int j = 0; j < 4; ++j) r.push_back(static_cast<int>(7 + rng.below(33)));
    r.push_back(text::kEos);
    s.examples.push_back({&s.contexts[k], r});
  }
  return s;
}

std::string snapshot(const dec::FusionDecoder<float>& m) { return dec::save_decoder(m).serialize(); }

}  // namespace

TEST_CASE("adamw step") {
  auto make = [](double p) {
    ParamStore<double> ps;
    ps.add("p", nc::Tensor<double>({1}, {p}, true));
    return ps;
  };
  SUBCASE("zero gradients without decay leave parameters unchanged") {
    auto ps = make(1.5);
    ps.zero_grad();
    AdamW<double> opt(ps, {1e-3, 0.9, 0.999, 1e-8, 0.0});
    for (int i = 0; i < 5; ++i) opt.step();
    CHECK(ps.get("p").data()[0] == 1.5);
  }
  SUBCASE("zero gradients with decay give exact multiplicative decay") {
    auto ps = make(1.5);
    ps.zero_grad();
    AdamW<double> opt(ps, {0.1, 0.9, 0.999, 1e-8, 0.2});
    opt.step();
    CHECK(ps.get("p").data()[0] == 1.5 - 0.1 * 0.2 * 1.5);
    opt.step();
    CHECK(std::abs(ps.get("p").data()[0] - 1.5 * 0.98 * 0.98) <= 1e-15);
  }
  SUBCASE("one step from p=1, g=0.5 with defaults matches the hand-evaluated update") {
    auto ps = make(1.0);
    ps.zero_grad();
    ps.get("p").mutable_grad()[0] = 0.5;
    AdamW<double> opt(ps, {1e-3, 0.9, 0.999, 1e-8, 0.01});
    opt.step();
    // decay: 1 - 1e-3*0.01 = 0.99999; m_hat = 0.05/0.1 = 0.5; v_hat = 0.00025/0.001 = 0.25
    const double expected = 0.99999 - 1e-3 * 0.5 / (0.5 + 1e-8);
    CHECK(std::abs(ps.get("p").data()[0] - expected) <= 1e-10);
    CHECK(std::abs(opt.first_moments()[0][0] - 0.05) <= 1e-15);
    CHECK(std::abs(opt.second_moments()[0][0] - 0.00025) <= 1e-15);
    // Second step with the same gradient: m = 0.095, v = 0.00049975.
    opt.step();
    const double m_hat = 0.095 / (1 - 0.81), v_hat = 0.00049975 / (1 - 0.998001);
    const double expected2 = expected * (1 - 1e-5) - 1e-3 * m_hat / (std::sqrt(v_hat) + 1e-8);
    CHECK(std::abs(ps.get("p").data()[0] - expected2) <= 1e-10);
  }
}

TEST_CASE("gradient clipping") {
  ParamStore<double> ps;
  ps.add("a", nc::Tensor<double>({2}, {0, 0}, true));
  ps.add("b", nc::Tensor<double>({1}, {0}, true));
  ps.zero_grad();
  ps.get("a").mutable_grad()[0] = 3;
  ps.get("a").mutable_grad()[1] = 0;
  ps.get("b").mutable_grad()[0] = 4;
  CHECK(clip_grad_norm(ps, 1.0) == 5.0);
  CHECK(std::abs(ps.get("a").grad()[0] - 0.6) <= 1e-15);
  CHECK(std::abs(ps.get("b").grad()[0] - 0.8) <= 1e-15);
  CHECK(std::abs(clip_grad_norm(ps, 2.0) - 1.0) <= 1e-15);
  CHECK(std::abs(ps.get("b").grad()[0] - 0.8) <= 1e-15);
}

TEST_CASE("train") {
  auto set = probe_set();
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.epochs = 2;

  SUBCASE("same seed gives bitwise-identical checkpoints") {
    auto a = init_decoder(desk_config(), 3), b = init_decoder(desk_config(), 3);
    train(a, set.examples, cfg);
    train(b, set.examples, cfg);
    CHECK(snapshot(a) == snapshot(b));
  }
  SUBCASE("lr=0 leaves parameters unchanged across an epoch") {
    auto m = init_decoder(desk_config(), 3);
    const auto before = snapshot(m);
    cfg.lr = 0.0;
    cfg.epochs = 1;
    train(m, set.examples, cfg);
    CHECK(snapshot(m) == before);
  }
  SUBCASE("outputs on disk") {
    namespace fs = std::filesystem;
    fs::remove_all("optim_test_tmp");
    auto m = init_decoder(desk_config(), 3);
    cfg.checkpoint_every = 2;
    auto r = train(m, set.examples, cfg, "optim_test_tmp/run");
    CHECK(r.steps == 4);
    const auto csv = binio::read_file("optim_test_tmp/run/loss.csv");
    CHECK(csv.rfind("step,loss\n1,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(fs::exists("optim_test_tmp/run/step2.ckpt"));
    CHECK(fs::exists("optim_test_tmp/run/step4.ckpt"));
    auto ck = Checkpoint::load("optim_test_tmp/run/model.ckpt");
    CHECK(ck.config["seed"] == 5);
    CHECK(ck.serialize() == dec::save_decoder(m, {{"seed", 5}, {"step", 4}, {"train", cfg.to_json()}}).serialize());
  }
  SUBCASE("errors") {
    auto m = init_decoder(desk_config(), 3);
    CHECK_THROWS_AS(train(m, {}, cfg), InputError);
    m.params().get("dec.lnf.g").mutable_data()[0] = std::nanf("");
    try {
      train(m, set.examples, cfg);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() == 1);
    }
  }
}

TEST_CASE("overfit probe") {
  auto set = probe_set();
  auto model = init_decoder(desk_config(), 11);
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.epochs = 250;  // 8 examples, batch 4: 500 steps
  double first_below = -1;
  auto r = train(model, set.examples, cfg, "", [&](std::size_t step, double loss) {
    if (first_below < 0 && loss < 0.05) first_below = static_cast<double>(step);
  });
  CHECK(r.steps == 500);
  nc::NoGradGuard ng;
  double mean = 0.0;
  for (const auto& ex : set.examples) mean += model.sequence_nll(*ex.context, ex.response).item() / 8.0;
  INFO("final mean nll " << mean << ", first batch below 0.05 at step " << first_below);
  CHECK(mean < 0.05);
  const double trailing = std::accumulate(r.losses.end() - 100, r.losses.end(), 0.0) / 100.0;
  CHECK(trailing < r.losses.front());
}

TEST_CASE("seed variants") {
  auto set = probe_set();
  TrainConfig cfg;
  cfg.seed = 21;
  cfg.epochs = 1;
  auto one = seed_variants(desk_config(), set.examples, cfg, 1);
  auto direct = init_decoder(desk_config(), 21);
  train(direct, set.examples, cfg);
  CHECK(snapshot(one[0].model) == snapshot(direct));

  std::filesystem::remove_all("optim_test_tmp/variants");
  auto many = seed_variants(desk_config(), set.examples, cfg, 3, "optim_test_tmp/variants");
  REQUIRE(many.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(many[k].seed == 21 + k);
    auto ck = Checkpoint::load("optim_test_tmp/variants/seed" + std::to_string(21 + k) + "/model.ckpt");
    CHECK(ck.config["seed"] == 21 + k);
  }
  CHECK(snapshot(many[0].model) == snapshot(one[0].model));
  CHECK(snapshot(many[0].model) != snapshot(many[1].model));
  CHECK(snapshot(many[1].model) != snapshot(many[2].model));
}
