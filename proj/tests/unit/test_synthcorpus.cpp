#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"
#include "avsd/synthcorpus.hpp"
#include "avsd/textpiece.hpp"

using namespace avsd;
using namespace avsd::synth;

namespace {

// Flood fill over non-black pixels with 4-connectivity.
int count_components(const vid::Frame& f) {
  std::vector<int> seen(f.width * f.height, 0);
  auto lit = [&](std::size_t x, std::size_t y) { return f.at(x, y, 0) + f.at(x, y, 1) + f.at(x, y, 2) > 0.0f; };
  int n = 0;
  for (std::size_t y = 0; y < f.height; ++y) {
    for (std::size_t x = 0; x < f.width; ++x) {
      if (!lit(x, y) || seen[y * f.width + x]) continue;
      ++n;
      std::vector<std::pair<std::size_t, std::size_t>> stack{{x, y}};
      seen[y * f.width + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const long nx = static_cast<long>(cx) + dx[k], ny = static_cast<long>(cy) + dy[k];
          if (nx < 0 || ny < 0 || nx >= static_cast<long>(f.width) || ny >= static_cast<long>(f.height)) continue;
          const auto ux = static_cast<std::size_t>(nx), uy = static_cast<std::size_t>(ny);
          if (lit(ux, uy) && !seen[uy * f.width + ux]) {
            seen[uy * f.width + ux] = 1;
            stack.push_back({ux, uy});
          }
        }
      }
    }
  }
  return n;
}

std::string expected_motion(Motion m) {
  switch (m) {
    case Motion::kLeft: return "it moves to the left";
    case Motion::kRight: return "it moves to the right";
    case Motion::kUp: return "it moves to the top";
    case Motion::kDown: return "it moves to the bottom";
    default: return "it does not move";
  }
}

// Recomputes an answer from the scene alone.
std::string recompute(const SceneSpec& s, const std::string& family) {
  const int n = static_cast<int>(s.objects.size());
  const char* words[] = {"", "one", "two", "three", "four"};
  if (family == "count") return n == 1 ? "there is one object" : std::string("there are ") + words[n] + " objects";
  int big = -1;
  for (int i = 0; i < n; ++i) {
    if (big < 0 || s.objects[static_cast<std::size_t>(i)].size > s.objects[static_cast<std::size_t>(big)].size) big = i;
  }
  const auto& largest = s.objects[static_cast<std::size_t>(big)];
  if (family == "color") return std::string("the largest object is ") + color_name(largest.color);
  if (family == "followup_motion") return expected_motion(largest.motion);
  if (family == "motion") {
    for (const auto& o : s.objects) {
      if (o.color == Color::kRed) return expected_motion(o.motion);
    }
    return "<no red object>";
  }
  const ObjectSpec* first_exit = nullptr;
  for (const auto& o : s.objects) {
    if (o.exit < s.length - 1 && (!first_exit || o.exit < first_exit->exit)) first_exit = &o;
  }
  if (family == "presence") return first_exit ? "yes , an object leaves" : "no , every object stays";
  if (family == "followup_color") return first_exit ? std::string("that object is ") + color_name(first_exit->color) : "<none>";
  return "<unknown family>";
}

}  // namespace

TEST_CASE("generate_scene") {
  SceneParams params;
  SUBCASE("deterministic") {
    auto a = generate_scene(42, params), b = generate_scene(42, params);
    CHECK(a == b);
    CHECK(render(a) == render(b));
    CHECK_FALSE(generate_scene(43, params) == a);
  }
  SUBCASE("length, frame size and component counts") {
    std::set<int> counts;
    for (std::uint64_t seed = 1; seed <= 300; ++seed) {
      auto s = generate_scene(seed, params);
      const auto clip = render(s);
      REQUIRE(static_cast<int>(clip.size()) == s.length);
      CHECK(s.length >= 16);
      CHECK(s.length <= 96);
      counts.insert(static_cast<int>(s.objects.size()));
      for (int f = 0; f < s.length; ++f) {
        CHECK(clip[static_cast<std::size_t>(f)].width == 32);
        int alive = 0;
        for (const auto& o : s.objects) alive += o.alive(f) ? 1 : 0;
        // Holds for every frame, not only those with all objects alive.
        CHECK(count_components(clip[static_cast<std::size_t>(f)]) == alive);
      }
      std::set<Color> colors;
      for (const auto& o : s.objects) {
        colors.insert(o.color);
        bool sampled = false;
        for (auto i : sampler::fixed_indices(static_cast<std::size_t>(s.length), 8)) sampled = sampled || o.alive(static_cast<int>(i));
        CHECK(sampled);
      }
      CHECK(colors.size() == s.objects.size());
    }
    CHECK(counts == std::set<int>{1, 2, 3, 4});
  }
  SUBCASE("disjoint lifetimes never show every object at once") {
    params.disjoint_lifetimes = true;
    for (int count = 2; count <= 4; ++count) {
      params.forced_count = count;
      auto s = generate_scene(static_cast<std::uint64_t>(count), params);
      CHECK(static_cast<int>(s.objects.size()) == count);
      for (int f = 0; f < s.length; ++f) {
        int alive = 0;
        for (const auto& o : s.objects) alive += o.alive(f) ? 1 : 0;
        CHECK(alive == 1);
      }
    }
  }
  SUBCASE("scene json round trip") {
    auto s = generate_scene(9, params);
    CHECK(SceneSpec::from_json(nlohmann::json::parse(s.to_json().dump())) == s);
  }
  params.min_length = 8;
  CHECK_THROWS_AS(generate_scene(1, params), ConfigError);
}

TEST_CASE("generate_dialog") {
  SceneSpec s;
  s.length = 20;
  auto obj = [](Color c, int size, Motion m, int x) {
    ObjectSpec o;
    o.color = c;
    o.size = size;
    o.motion = m;
    o.distance = m == Motion::kStatic ? 0 : 4;
    o.x0 = x;
    o.y0 = 10;
    o.entry = 0;
    o.exit = 19;
    return o;
  };
  s.objects = {obj(Color::kRed, 4, Motion::kStatic, 0), obj(Color::kBlue, 6, Motion::kStatic, 10),
               obj(Color::kGreen, 5, Motion::kStatic, 20)};
  auto d = generate_dialog(s, 10, 1);
  std::map<std::string, std::string> by_family;
  for (const auto& t : d) by_family[t.question] = t.answer;
  CHECK(by_family.at("how many objects are in the video ?") == "there are three objects");
  CHECK(by_family.at("does an object leave the scene ?") == "no , every object stays");
  CHECK(by_family.at("what color is the largest object ?") == "the largest object is blue");
  CHECK(by_family.at("which direction does the red object move ?") == "it does not move");
  CHECK(generate_dialog(s, 10, 1).size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(generate_dialog(s, 10, 1)[i].answer == d[i].answer);
  SUBCASE("inapplicable templates are skipped") {
    s.objects = {obj(Color::kBlue, 5, Motion::kLeft, 10), obj(Color::kGreen, 5, Motion::kStatic, 20)};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      for (const auto& t : generate_dialog(s, 10, seed)) {
        CHECK(t.family != "color");
        CHECK(t.family != "motion");
      }
    }
  }
  SUBCASE("one object uses the singular") {
    s.objects = {obj(Color::kRed, 5, Motion::kLeft, 10)};
    CHECK(generate_dialog(s, 3, 2).front().family.size() > 0);
    bool found = false;
    for (const auto& t : generate_dialog(s, 3, 2)) found = found || t.answer == "there is one object";
    CHECK(found);
  }
}

TEST_CASE("corpus") {
  CorpusConfig cfg;
  cfg.train = 200;
  cfg.valid = 10;
  cfg.test = 60;
  const auto corpus = generate_corpus(cfg);
  CHECK(corpus.train.size() == 200);
  CHECK(corpus.test.size() == 60);

  SUBCASE("answers are recomputable from the scene and the counting question is always asked") {
    for (const auto* split : {&corpus.train, &corpus.valid, &corpus.test}) {
      for (const auto& r : *split) {
        CHECK(r.turns.size() <= 3);
        bool counted = false;
        for (std::size_t i = 0; i < r.turns.size(); ++i) {
          const auto& t = r.turns[i];
          counted = counted || t.family == "count";
          CHECK(t.answer == recompute(r.scene, t.family));
          CHECK(t.references.size() == 3);
          CHECK(t.references.front() == t.answer);
          for (const auto& ref : t.references) CHECK(text::split_words(ref).size() >= 4);
          if (t.family.rfind("followup", 0) == 0) {
            REQUIRE(i > 0);
            CHECK(r.turns[i - 1].family == (t.family == "followup_motion" ? "color" : "presence"));
          }
        }
        CHECK(counted);
      }
    }
  }
  SUBCASE("each count class has a scene whose lifetimes never overlap") {
    std::set<std::size_t> classes;
    for (const auto& r : corpus.train) {
      bool overlap = false;
      for (int f = 0; f < r.scene.length; ++f) {
        int alive = 0;
        for (const auto& o : r.scene.objects) alive += o.alive(f) ? 1 : 0;
        overlap = overlap || alive > 1;
      }
      if (!overlap) classes.insert(r.scene.objects.size());
    }
    CHECK(classes == std::set<std::size_t>{1, 2, 3, 4});
  }
  SUBCASE("deterministic") {
    const auto again = generate_corpus(cfg);
    for (std::size_t i = 0; i < corpus.train.size(); ++i) {
      CHECK(corpus.train[i].to_json(true) == again.train[i].to_json(true));
    }
  }
  SUBCASE("test answers need no unknown token under a vocabulary trained on train") {
    std::vector<std::string> lines;
    for (const auto& r : corpus.train) {
      for (const auto& t : r.turns) {
        lines.push_back(t.question);
        lines.push_back(t.answer);
      }
    }
    const auto vocab = text::train_vocab(lines, 300);
    for (const auto& r : corpus.test) {
      for (const auto& t : r.turns) {
        for (const auto& ref : t.references) {
          const auto ids = text::encode(ref, vocab);
          CHECK(std::find(ids.begin(), ids.end(), text::kUnk) == ids.end());
          CHECK(text::decode(ids, vocab) == text::normalize(ref));
        }
      }
    }
  }
}

TEST_CASE("write_corpus") {
  namespace fs = std::filesystem;
  const std::string root = "synth_test_tmp/corpus";
  fs::remove_all(root);
  CorpusConfig cfg;
  cfg.train = 6;
  cfg.valid = 2;
  cfg.test = 3;
  vid::EncoderConfig ec;
  ec.width = 16;
  ec.ffn_width = 32;
  ec.blocks = 1;
  Rng rng(1);
  auto encoder = vid::VideoEncoder<float>::init(ec, rng);
  const auto corpus = generate_corpus(cfg);
  write_corpus(corpus, root, encoder, sampler::Mode::kFixed);

  auto count_lines = [](const std::string& p) {
    const auto s = binio::read_file(p);
    return std::count(s.begin(), s.end(), '\n');
  };
  CHECK(count_lines(root + "/train.jsonl") == 6);
  CHECK(count_lines(root + "/valid.jsonl") == 2);
  CHECK(count_lines(root + "/test.jsonl") == 3);
  std::size_t test_turns = 0;
  for (const auto& r : corpus.test) test_turns += r.turns.size();
  CHECK(static_cast<std::size_t>(count_lines(root + "/test_refs.jsonl")) == test_turns);

  for (const char* split : {"train", "valid", "test"}) {
    for (const auto& r : read_split(root + "/" + split + ".jsonl")) {
      auto f = sampler::read_features(root + "/" + r.features);
      CHECK(f.frames == 8);
      CHECK(f.width == 16);
      CHECK(f.video_id == r.video_id);
    }
  }
  const auto back = read_split(root + "/test.jsonl");
  CHECK(back.front().turns.front().references == corpus.test.front().turns.front().references);
  CHECK_THROWS_AS(read_split(root + "/missing.jsonl"), IoError);
}
