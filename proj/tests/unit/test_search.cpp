#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "avsd/error.hpp"
#include "avsd/search.hpp"

using namespace avsd;
using namespace avsd::search;

namespace {

// Deterministic pseudo-random distribution per prefix. `peaky` sharpens it.
FunctionModel toy_model(std::size_t vocab, std::uint64_t seed, double peaky = 1.0) {
  return FunctionModel(vocab, [=](const TokenIds& prefix) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto t : prefix) h = (h ^ static_cast<std::uint64_t>(t + 1)) * 1099511628211ull;
    auto rng = Rng::derive(seed, h);
    std::vector<double> p(vocab);
    double s = 0.0;
    for (auto& x : p) s += x = std::pow(rng.uniform(0.01, 1.0), peaky);
    for (auto& x : p) x /= s;
    return p;
  });
}

// Every complete sequence: ends in eos, or reaches max_len without eos.
void enumerate(const NextTokenModel& m, const DecodeConfig& cfg, TokenIds& prefix, double cum, Hypothesis& best,
               bool& have) {
  const auto p = m.distribution(prefix);
  for (std::size_t v = 0; v < p.size(); ++v) {
    prefix.push_back(static_cast<int>(v));
    const double c = cum + std::log(p[v]);
    if (static_cast<int>(v) == cfg.eos || prefix.size() == cfg.max_length) {
      Hypothesis h{prefix, c, true};
      const double s = h.score(cfg.alpha);
      if (!have || s > best.score(cfg.alpha) || (s == best.score(cfg.alpha) && h.tokens < best.tokens)) {
        best = h;
        have = true;
      }
    } else {
      enumerate(m, cfg, prefix, c, best, have);
    }
    prefix.pop_back();
  }
}

Hypothesis brute_force(const NextTokenModel& m, const DecodeConfig& cfg) {
  TokenIds prefix;
  Hypothesis best;
  bool have = false;
  enumerate(m, cfg, prefix, 0.0, best, have);
  return best;
}

}  // namespace

TEST_CASE("ensemble_distribution") {
  auto a = toy_model(6, 1), b = toy_model(6, 2);
  SUBCASE("copies of one model reproduce it") {
    // Exact, not approximate: 3 copies once rounded in a plain double sum.
    for (std::size_t k = 1; k <= 8; ++k) {
      std::vector<const NextTokenModel*> members(k, &a);
      for (const TokenIds& prefix : {TokenIds{}, TokenIds{1, 2}, TokenIds{3}}) {
        CHECK(Ensemble(members).distribution(prefix) == a.distribution(prefix));
      }
    }
  }
  SUBCASE("two one-hot distributions") {
    FunctionModel x(3, [](const TokenIds&) { return std::vector<double>{1, 0, 0}; });
    FunctionModel y(3, [](const TokenIds&) { return std::vector<double>{0, 0, 1}; });
    CHECK(Ensemble({&x, &y}).distribution({}) == std::vector<double>{0.5, 0, 0.5});
  }
  SUBCASE("mean sums to one") {
    auto c = toy_model(6, 3);
    const auto p = Ensemble({&a, &b, &c}).distribution({4});
    double s = 0.0;
    for (auto v : p) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
  SUBCASE("errors") {
    auto other = toy_model(7, 1);
    CHECK_THROWS_AS(Ensemble({&a, &other}), ConfigError);
    CHECK_THROWS_AS(Ensemble({}), ConfigError);
  }
}

TEST_CASE("greedy") {
  SUBCASE("eos first gives an empty response") {
    FunctionModel m(4, [](const TokenIds&) { return std::vector<double>{0.1, 0.1, 0.7, 0.1}; });
    auto r = greedy(m, 10);
    CHECK(r.tokens.empty());
    CHECK(r.ended_with_eos);
  }
  SUBCASE("ties go to the lowest id") {
    FunctionModel m(4, [](const TokenIds& p) {
      return p.size() < 2 ? std::vector<double>{0.0, 0.4, 0.2, 0.4} : std::vector<double>{0, 0, 1, 0};
    });
    CHECK(greedy(m, 10).tokens == TokenIds{1, 1});
  }
  SUBCASE("path probabilities multiply to exp(cum_logprob)") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      auto m = toy_model(8, seed);
      auto r = greedy(m, 12);
      TokenIds path = r.tokens;
      if (r.ended_with_eos) path.push_back(text::kEos);
      double prod = 1.0;
      TokenIds prefix;
      for (auto t : path) {
        prod *= m.distribution(prefix)[static_cast<std::size_t>(t)];
        prefix.push_back(t);
      }
      CHECK(std::abs(prod - std::exp(r.cum_logprob)) <= 1e-6 * std::max(1.0, prod));
    }
  }
  SUBCASE("max length stops without eos") {
    FunctionModel m(4, [](const TokenIds&) { return std::vector<double>{0.1, 0.6, 0.2, 0.1}; });
    auto r = greedy(m, 5);
    CHECK(r.tokens == TokenIds{1, 1, 1, 1, 1});
    CHECK_FALSE(r.ended_with_eos);
  }
}

TEST_CASE("beam_search") {
  SUBCASE("beam=1 equals greedy token for token") {
    for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      auto m = toy_model(9, seed, 2.0);
      DecodeConfig cfg;
      cfg.beam = 1;
      cfg.max_length = 15;
      CHECK(beam_search(m, cfg).tokens == greedy(m, 15).tokens);
    }
  }
  SUBCASE("exhaustive beam matches brute-force argmax of the normalised score") {
    for (double alpha : {0.0, 0.3, 1.0}) {
      for (std::uint64_t seed = 1; seed <= 15; ++seed) {
        for (std::size_t vocab : {3u, 4u, 5u}) {
          auto m = toy_model(vocab, seed * 31 + vocab, 3.0);
          DecodeConfig cfg;
          cfg.alpha = alpha;
          cfg.max_length = 4;
          cfg.beam = 5 * 5 * 5 * 5;
          auto oracle = brute_force(m, cfg);
          auto r = beam_search(m, cfg);
          TokenIds full = r.tokens;
          if (r.ended_with_eos) full.push_back(cfg.eos);
          INFO("alpha " << alpha << " seed " << seed << " vocab " << vocab);
          CHECK(full == oracle.tokens);
          CHECK(r.score == oracle.score(alpha));
        }
      }
    }
  }
  SUBCASE("alpha=0 selects by raw cumulative log-probability") {
    // Short path: eos now with p=0.4. Long path: token 1 then eos, 0.6*0.9=0.54.
    FunctionModel m(3, [](const TokenIds& p) {
      if (p.empty()) return std::vector<double>{0.0, 0.6, 0.4};
      return std::vector<double>{0.05, 0.05, 0.9};
    });
    DecodeConfig cfg;
    cfg.alpha = 0.0;
    cfg.beam = 3;
    CHECK(beam_search(m, cfg).tokens == TokenIds{1});
    // log(0.4)/1 < log(0.54)/2, so alpha=1 agrees here.
    cfg.alpha = 1.0;
    CHECK(beam_search(m, cfg).tokens == TokenIds{1});
  }
  SUBCASE("length penalty can change the winner") {
    // eos now: 0.5. Long: 0.5*0.8 = 0.4. Raw prefers short; length-normalised with alpha=1
    // compares log 0.5 = -0.693 with log 0.4 / 2 = -0.458 and prefers long.
    FunctionModel m(3, [](const TokenIds& p) {
      if (p.empty()) return std::vector<double>{0.0, 0.5, 0.5};
      return std::vector<double>{0.1, 0.1, 0.8};
    });
    DecodeConfig cfg;
    cfg.beam = 2;
    cfg.alpha = 0.0;
    CHECK(beam_search(m, cfg).tokens.empty());
    cfg.alpha = 1.0;
    CHECK(beam_search(m, cfg).tokens == TokenIds{1});
  }
  SUBCASE("always returns; worst case max length") {
    FunctionModel m(3, [](const TokenIds&) { return std::vector<double>{0.5, 0.5, 0.0}; });
    DecodeConfig cfg;
    cfg.max_length = 6;
    auto r = beam_search(m, cfg);
    CHECK(r.tokens.size() == 6);
    CHECK_FALSE(r.ended_with_eos);
  }
  SUBCASE("cumulative log-probability never increases along a hypothesis") {
    auto m = toy_model(6, 77);
    DecodeConfig cfg;
    cfg.max_length = 8;
    auto r = beam_search(m, cfg);
    TokenIds prefix;
    double cum = 0.0;
    for (auto t : r.tokens) {
      const double next = cum + std::log(m.distribution(prefix)[static_cast<std::size_t>(t)]);
      CHECK(next <= cum);
      cum = next;
      prefix.push_back(t);
    }
  }
  CHECK_THROWS_AS(beam_search(toy_model(3, 1), DecodeConfig{0, 5, 0.3}), ConfigError);
}

TEST_CASE("decoding a real decoder, alone and as an ensemble of copies") {
  dec::DecoderConfig cfg;
  cfg.vocab_size = 30;
  cfg.feature_width = 8;
  cfg.max_positions = 64;
  Rng rng(5);
  auto model = dec::FusionDecoder<float>::init(cfg, rng);
  dec::DialogContext ctx;
  ctx.video.frames = 2;
  ctx.video.width = 8;
  for (int i = 0; i < 16; ++i) ctx.video.values.push_back(static_cast<float>(rng.normal()));
  ctx.question = {10, 11, 12};
  DecoderModel single(model, ctx);
  Ensemble copies({&single, &single});
  DecodeConfig dc;
  dc.max_length = 10;
  auto a = beam_search(single, dc), b = beam_search(copies, dc);
  CHECK(a.tokens == b.tokens);
  CHECK(a.score == b.score);
  dc.beam = 1;
  CHECK(beam_search(single, dc).tokens == greedy(single, 10).tokens);
}
