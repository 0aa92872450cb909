#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"
#include "avsd/rng.hpp"
#include "avsd/scorer.hpp"
#include "naive_metrics.hpp"

using namespace avsd;
using namespace avsd::score;
using namespace avsd::testing;

namespace {

Tokens T(const std::string& s) { return tokenize(s); }

Corpus single(const std::string& cand, const std::string& ref) { return {EvalPair{T(cand), {T(ref)}}}; }

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("Yes, it MOVES left.") == Tokens{"yes", ",", "it", "moves", "left", "."});
  CHECK(tokenize("  ") == Tokens{});
  CHECK(tokenize("how many ?") == Tokens{"how", "many", "?"});
}

TEST_CASE("bleu") {
  Corpus id{EvalPair{T("there are 3 objects"), {T("there are 3 objects")}},
            EvalPair{T("it is red"), {T("the object is red"), T("it is red")}}};
  for (int n = 1; n <= 4; ++n) CHECK(std::abs(bleu(id, n) - 1.0) <= 1e-6);
  CHECK(std::abs(bleu(single("the cat sat", "the cat sat down"), 1) - 0.7165) <= 1e-4);
  CHECK(std::abs(bleu(single("the cat sat", "the cat sat down"), 1) - std::exp(1.0 - 4.0 / 3.0)) <= 1e-12);
  CHECK(bleu(single("x y z", "a b c"), 1) <= 1e-6);
  CHECK(bleu(single("x y z w", "a b c d"), 4) <= 1e-6);
  SUBCASE("closest reference length, ties to the shorter") {
    // |c|=3; refs of length 2 and 4 tie at distance 1 -> r=2, so no brevity penalty.
    Corpus c{EvalPair{T("a b c"), {T("a b"), T("a b c d")}}};
    CHECK(bleu(c, 1) == 1.0);
  }
  SUBCASE("an empty prediction only adds reference length") {
    Corpus c{EvalPair{T("a b c"), {T("a b c")}}, EvalPair{{}, {T("a b c")}}};
    CHECK(std::abs(bleu(c, 1) - std::exp(1.0 - 6.0 / 3.0)) <= 1e-12);
  }
  CHECK_THROWS_AS(bleu({}, 1), InputError);
  CHECK_THROWS_AS(bleu(id, 5), InputError);
}

TEST_CASE("rouge_l") {
  CHECK(rouge_l(single("a b c", "a b c")) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(rouge_l(single("a b c", "a x c")) - 2.0 / 3.0) <= 1e-12);
  CHECK(rouge_l(single("a b", "c d")) == 0.0);
  CHECK(rouge_l(single("", "c d")) == 0.0);
}

TEST_CASE("cider") {
  CHECK(std::abs(cider(single("there are 3 objects", "there are 3 objects")) - 10.0) <= 1e-6);
  Corpus id{EvalPair{T("there are 3 objects"), {T("there are 3 objects")}},
            EvalPair{T("the big one is red"), {T("the big one is red")}}};
  CHECK(std::abs(cider(id) - 10.0) <= 1e-6);
  CHECK(cider(single("a b c d", "e f g h")) == 0.0);
  SUBCASE("clipping: repeating a word does not raise the score") {
    Corpus base{EvalPair{T("red cube"), {T("red cube")}}, EvalPair{T("blue"), {T("green")}}};
    Corpus dup{EvalPair{T("red red cube"), {T("red cube")}}, EvalPair{T("blue"), {T("green")}}};
    CHECK(cider(dup) <= cider(base));
  }
}

TEST_CASE("meteor_lite") {
  CHECK(std::abs(meteor_lite(single("a b c", "a b c")) - (1 - 0.5 / 27.0)) <= 1e-12);
  CHECK(std::abs(meteor_lite(single("a b c", "a b c")) - 0.9815) <= 1e-4);
  CHECK(meteor_lite(single("a b", "c d")) == 0.0);
  CHECK(std::abs(meteor_lite(single("a b", "b a")) - 0.5) <= 1e-12);
}

TEST_CASE("properties on random corpora") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_corpus(rng, 1 + rng.below(4));
    for (int n = 1; n <= 4; ++n) CHECK(std::abs(bleu(c, n) - naive_bleu(c, n)) <= 1e-9);
    CHECK(std::abs(rouge_l(c) - naive_rouge(c)) <= 1e-9);
    CHECK(std::abs(meteor_lite(c) - naive_meteor(c)) <= 1e-9);
    CHECK(std::abs(cider(c) - naive_cider(c)) <= 1e-9);

    const auto report = evaluate(c);
    for (double v : {report.bleu[0], report.bleu[3], report.rouge, report.meteor}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0 + 1e-12);
    }
    CHECK(report.cider >= 0.0);

    // Reference order never matters.
    auto rev = c;
    for (auto& p : rev) std::reverse(p.references.begin(), p.references.end());
    CHECK(evaluate(rev).to_json() == report.to_json());

    // A duplicated reference never lowers max-over-reference metrics.
    auto more = c;
    more[0].references.push_back(more[0].references.front());
    CHECK(rouge_l(more) >= rouge_l(c) - 1e-12);
    CHECK(meteor_lite(more) >= meteor_lite(c) - 1e-12);
  }
}

TEST_CASE("evaluate_run") {
  const std::string dir = "scorer_test_tmp/";
  binio::write_file(dir + "refs.jsonl",
                    "{\"id\":\"v1_0\",\"answers\":[\"there are 3 objects\"],\"family\":\"count\"}\n"
                    "{\"id\":\"v1_1\",\"answers\":[\"the largest object is red\"],\"family\":\"color\"}\n"
                    "{\"id\":\"v2_0\",\"answers\":[\"there is one object\"],\"family\":\"count\"}\n");
  SUBCASE("predictions equal references") {
    binio::write_file(dir + "pred.jsonl",
                      "{\"id\":\"v1_0\",\"answer\":\"there are 3 objects\"}\n"
                      "{\"id\":\"v2_0\",\"answer\":\"There is one object\"}\n"
                      "{\"id\":\"v1_1\",\"answer\":\"the largest object is red\"}\n");
    auto r = evaluate_run(dir + "pred.jsonl", dir + "refs.jsonl");
    for (double b : r.bleu) CHECK(std::abs(b - 1.0) <= 1e-6);
    CHECK(std::abs(r.rouge - 1.0) <= 1e-6);
    CHECK(std::abs(r.cider - 10.0) <= 1e-6);
    CHECK(std::abs(r.meteor - (1 - 0.5 / 64.0 * 2.0 / 3.0 - 0.5 / 125.0 / 3.0)) <= 1e-12);
    CHECK(r.family_accuracy.at("count") == 1.0);
    auto j = r.to_json();
    CHECK(j["BLEU-1"] == 1.0);
    CHECK(j["METEOR-lite"] == std::round(r.meteor * 1e4) / 1e4);
    CHECK(r.to_text().rfind("BLEU-1 1.0000\n", 0) == 0);
  }
  SUBCASE("an empty prediction contributes zero to pairwise metrics") {
    binio::write_file(dir + "pred.jsonl",
                      "{\"id\":\"v1_0\",\"answer\":\"there are 3 objects\"}\n"
                      "{\"id\":\"v2_0\",\"answer\":\"\"}\n"
                      "{\"id\":\"v1_1\",\"answer\":\"the largest object is red\"}\n");
    auto r = evaluate_run(dir + "pred.jsonl", dir + "refs.jsonl");
    CHECK(std::abs(r.rouge - 2.0 / 3.0) <= 1e-12);
    CHECK(r.family_accuracy.at("count") == 0.5);
    CHECK(std::abs(r.bleu[0] - std::exp(1.0 - 13.0 / 9.0)) <= 1e-12);
  }
  SUBCASE("misaligned ids are listed") {
    binio::write_file(dir + "pred.jsonl", "{\"id\":\"v1_0\",\"answer\":\"x\"}\n{\"id\":\"zz\",\"answer\":\"x\"}\n");
    try {
      evaluate_run(dir + "pred.jsonl", dir + "refs.jsonl");
      FAIL("expected an alignment error");
    } catch (const InputError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("v1_1") != std::string::npos);
      CHECK(msg.find("v2_0") != std::string::npos);
      CHECK(msg.find("zz") != std::string::npos);
    }
  }
  SUBCASE("malformed line") {
    binio::write_file(dir + "pred.jsonl", "{\"id\":\"v1_0\"\n");
    CHECK_THROWS_AS(evaluate_run(dir + "pred.jsonl", dir + "refs.jsonl"), FormatError);
  }
}
