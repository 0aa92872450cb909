#include "avsd/synthcorpus.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd::synth {

namespace {

constexpr const char* kColorNames[] = {"red", "green", "blue", "yellow"};
constexpr const char* kMotionNames[] = {"left", "right", "up", "down", "static"};
constexpr float kRgb[4][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const char* const (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  throw FormatError(std::string("unknown ") + what + " '" + s + "'");
}

bool separated(const ObjectSpec& a, const ObjectSpec& b) {
  for (int f = std::max(a.entry, b.entry); f <= std::min(a.exit, b.exit); ++f) {
    const auto [ax, ay] = a.position(f);
    const auto [bx, by] = b.position(f);
    const bool apart = ax + a.size < bx || bx + b.size < ax || ay + a.size < by || by + b.size < ay;
    if (!apart) return false;
  }
  return true;
}

bool covers_sample(const ObjectSpec& o, int length, int sampled) {
  for (auto i : sampler::fixed_indices(static_cast<std::size_t>(length), static_cast<std::size_t>(sampled))) {
    if (o.alive(static_cast<int>(i))) return true;
  }
  return false;
}

}  // namespace

const char* color_name(Color c) { return kColorNames[static_cast<int>(c)]; }
const char* motion_name(Motion m) { return kMotionNames[static_cast<int>(m)]; }

std::pair<int, int> ObjectSpec::position(int frame) const {
  const int span = exit - entry;
  int offset = 0;
  if (span > 0) offset = (2 * distance * (frame - entry) + span) / (2 * span);  // rounded half up
  switch (motion) {
    case Motion::kLeft: return {x0 - offset, y0};
    case Motion::kRight: return {x0 + offset, y0};
    case Motion::kUp: return {x0, y0 - offset};
    case Motion::kDown: return {x0, y0 + offset};
    case Motion::kStatic: break;
  }
  return {x0, y0};
}

nlohmann::json SceneSpec::to_json() const {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : objects) {
    objs.push_back({{"color", color_name(o.color)}, {"size", o.size},   {"motion", motion_name(o.motion)},
                    {"distance", o.distance},       {"x0", o.x0},       {"y0", o.y0},
                    {"entry", o.entry},             {"exit", o.exit}});
  }
  return {{"seed", seed}, {"length", length}, {"frame_size", frame_size}, {"objects", objs}};
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.length = j.at("length").get<int>();
  s.frame_size = j.at("frame_size").get<int>();
  for (const auto& o : j.at("objects")) {
    ObjectSpec x;
    x.color = parse_enum<Color>(o.at("color").get<std::string>(), kColorNames, "color");
    x.size = o.at("size").get<int>();
    x.motion = parse_enum<Motion>(o.at("motion").get<std::string>(), kMotionNames, "motion");
    x.distance = o.at("distance").get<int>();
    x.x0 = o.at("x0").get<int>();
    x.y0 = o.at("y0").get<int>();
    x.entry = o.at("entry").get<int>();
    x.exit = o.at("exit").get<int>();
    s.objects.push_back(x);
  }
  return s;
}

SceneSpec generate_scene(std::uint64_t seed, const SceneParams& params) {
  if (params.min_length < 16 || params.max_length < params.min_length || params.frame_size < 16 ||
      params.max_objects < 1 || params.max_objects > 4 || params.forced_count < 0 || params.forced_count > 4 ||
      params.sampled_frames < 1) {
    throw ConfigError("scene parameters out of range");
  }
  Rng rng(seed);
  const int side = params.frame_size;
  while (true) {
    SceneSpec scene;
    scene.seed = seed;
    scene.frame_size = side;
    scene.length = rng.range(params.min_length, params.max_length);
    const int count = params.forced_count ? params.forced_count : rng.range(1, params.max_objects);
    const auto palette = rng.permutation(4);
    const int length = scene.length;
    const bool all_full = !params.disjoint_lifetimes && rng.uniform() < 0.5;
    bool ok = true;
    for (int k = 0; k < count && ok; ++k) {
      ObjectSpec o;
      o.color = static_cast<Color>(palette[static_cast<std::size_t>(k)]);
      if (params.disjoint_lifetimes) {
        const int window = length / count;
        o.entry = k * window;
        o.exit = k + 1 == count ? length - 1 : (k + 1) * window - 1;
      } else if (all_full || rng.uniform() < 0.5) {
        o.entry = 0;
        o.exit = length - 1;
      } else {
        const int span = rng.range((length + 3) / 4, length);
        o.entry = rng.range(0, length - span);
        o.exit = o.entry + span - 1;
      }
      if (!covers_sample(o, length, params.sampled_frames)) {
        ok = false;
        break;
      }
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        o.size = rng.range(4, 8);
        o.motion = static_cast<Motion>(rng.below(5));
        o.distance = o.motion == Motion::kStatic ? 0 : rng.range(4, 10);
        const int room = side - o.size;
        const int d = o.distance;
        o.x0 = o.motion == Motion::kLeft ? rng.range(d, room) : o.motion == Motion::kRight ? rng.range(0, room - d) : rng.range(0, room);
        o.y0 = o.motion == Motion::kUp ? rng.range(d, room) : o.motion == Motion::kDown ? rng.range(0, room - d) : rng.range(0, room);
        placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const ObjectSpec& other) { return separated(o, other); });
      }
      if (!placed) ok = false;
      scene.objects.push_back(o);
    }
    if (ok) return scene;
  }
}

vid::Clip render(const SceneSpec& scene) {
  vid::Clip clip;
  const auto side = static_cast<std::size_t>(scene.frame_size);
  for (int f = 0; f < scene.length; ++f) {
    vid::Frame frame(side, side);
    for (const auto& o : scene.objects) {
      if (!o.alive(f)) continue;
      const auto [x0, y0] = o.position(f);
      for (int y = y0; y < y0 + o.size; ++y) {
        for (int x = x0; x < x0 + o.size; ++x) {
          if (x < 0 || y < 0 || x >= scene.frame_size || y >= scene.frame_size) {
            throw InputError("scene object leaves the frame at frame " + std::to_string(f));
          }
          for (std::size_t c = 0; c < 3; ++c) {
            frame.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) = kRgb[static_cast<int>(o.color)][c];
          }
        }
      }
    }
    clip.push_back(std::move(frame));
  }
  return clip;
}

std::string number_word(int n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five"};
  if (n < 0 || n > 5) throw RangeError("number_word: " + std::to_string(n));
  return words[n];
}

namespace {

std::vector<std::string> motion_answers(Motion m, const std::string& subject) {
  switch (m) {
    case Motion::kLeft: return {"it moves to the left", subject + " moves to the left", "it goes to the left"};
    case Motion::kRight: return {"it moves to the right", subject + " moves to the right", "it goes to the right"};
    case Motion::kUp: return {"it moves to the top", subject + " moves to the top", "it goes to the top"};
    case Motion::kDown: return {"it moves to the bottom", subject + " moves to the bottom", "it goes to the bottom"};
    case Motion::kStatic: break;
  }
  return {"it does not move", subject + " does not move", "it stays in place"};
}

Turn make_turn(std::string question, std::string family, std::vector<std::string> refs) {
  Turn t;
  t.question = std::move(question);
  t.family = std::move(family);
  t.answer = refs.front();
  t.references = std::move(refs);
  return t;
}

}  // namespace

std::vector<Turn> generate_dialog(const SceneSpec& scene, int turns, std::uint64_t seed) {
  if (turns < 1) throw ConfigError("generate_dialog: turns must be at least 1");
  Rng rng(seed);
  const int n = static_cast<int>(scene.objects.size());
  const auto w = number_word(n);
  const auto counting =
      n == 1 ? make_turn("how many objects are in the video ?", "count",
                         {"there is one object", "i count one object", "one object appears in the video"})
             : make_turn("how many objects are in the video ?", "count",
                         {"there are " + w + " objects", "i count " + w + " objects", w + " objects appear in the video"});

  // Units keep a follow-up directly after the turn it refers to.
  std::vector<std::vector<Turn>> units;

  const ObjectSpec* largest = nullptr;
  bool unique = false;
  for (const auto& o : scene.objects) {
    if (!largest || o.size > largest->size) {
      largest = &o;
      unique = true;
    } else if (o.size == largest->size) {
      unique = false;
    }
  }
  if (unique) {
    const std::string c = color_name(largest->color);
    std::vector<Turn> u{make_turn("what color is the largest object ?", "color",
                                  {"the largest object is " + c, "the biggest object is " + c, "it is the " + c + " one"})};
    if (rng.uniform() < 0.5) {
      u.push_back(make_turn("which direction does it move ?", "followup_motion", motion_answers(largest->motion, "the largest object")));
    }
    units.push_back(std::move(u));
  }
  for (const auto& o : scene.objects) {
    if (o.color == Color::kRed) {
      units.push_back({make_turn("which direction does the red object move ?", "motion", motion_answers(o.motion, "the red object"))});
    }
  }
  const ObjectSpec* leaver = nullptr;
  for (const auto& o : scene.objects) {
    if (o.exit < scene.length - 1 && (!leaver || o.exit < leaver->exit)) leaver = &o;
  }
  if (leaver) {
    const std::string c = color_name(leaver->color);
    std::vector<Turn> u{make_turn("does an object leave the scene ?", "presence",
                                  {"yes , an object leaves", "yes , one of them leaves", "yes , an object goes away"})};
    if (rng.uniform() < 0.5) {
      u.push_back(make_turn("what color is it ?", "followup_color", {"that object is " + c, "the leaving object is " + c, "it is a " + c + " one"}));
    }
    units.push_back(std::move(u));
  } else {
    units.push_back({make_turn("does an object leave the scene ?", "presence",
                               {"no , every object stays", "no , they all stay", "no , nothing leaves the scene"})});
  }

  const auto order = rng.permutation(units.size());
  std::vector<Turn> others;
  std::vector<std::size_t> boundaries{0};
  for (auto i : order) {
    for (auto& t : units[i]) others.push_back(t);
    boundaries.push_back(others.size());
  }
  std::vector<std::size_t> allowed;
  for (auto b : boundaries) {
    if (b + 1 <= static_cast<std::size_t>(turns)) allowed.push_back(b);
  }
  const auto at = allowed[rng.below(allowed.size())];
  others.insert(others.begin() + static_cast<std::ptrdiff_t>(at), counting);
  if (others.size() > static_cast<std::size_t>(turns)) others.resize(static_cast<std::size_t>(turns));
  return others;
}

nlohmann::json DialogRecord::to_json(bool with_references) const {
  nlohmann::json dialog = nlohmann::json::array();
  nlohmann::json multi = nlohmann::json::array();
  for (const auto& t : turns) {
    dialog.push_back({{"question", t.question}, {"answer", t.answer}, {"family", t.family}});
    multi.push_back(t.references);
  }
  nlohmann::json j{{"video_id", video_id}, {"features", features}, {"scene", scene.to_json()}, {"dialog", dialog}};
  if (with_references) j["answers_multi"] = multi;
  return j;
}

DialogRecord DialogRecord::from_json(const nlohmann::json& j) {
  DialogRecord r;
  r.video_id = j.at("video_id").get<std::string>();
  r.features = j.at("features").get<std::string>();
  r.scene = SceneSpec::from_json(j.at("scene"));
  const auto& dialog = j.at("dialog");
  for (std::size_t i = 0; i < dialog.size(); ++i) {
    Turn t;
    t.question = dialog[i].at("question").get<std::string>();
    t.answer = dialog[i].at("answer").get<std::string>();
    t.family = dialog[i].value("family", "");
    if (j.contains("answers_multi")) {
      t.references = j["answers_multi"].at(i).get<std::vector<std::string>>();
    } else {
      t.references = {t.answer};
    }
    r.turns.push_back(std::move(t));
  }
  if (r.turns.empty()) throw FormatError("record " + r.video_id + " has no turns");
  return r;
}

void CorpusConfig::validate() const {
  if (train < 1 || valid < 0 || test < 1 || turns < 1) {
    throw ConfigError("corpus: train and test need at least one video, turns at least one");
  }
}

nlohmann::json CorpusConfig::to_json() const {
  return {{"seed", seed},
          {"train", train},
          {"valid", valid},
          {"test", test},
          {"turns", turns},
          {"min_length", scene.min_length},
          {"max_length", scene.max_length},
          {"frame_size", scene.frame_size},
          {"max_objects", scene.max_objects}};
}

CorpusConfig CorpusConfig::from_json(const nlohmann::json& j) {
  CorpusConfig c;
  c.seed = j.value("seed", c.seed);
  c.train = j.value("train", c.train);
  c.valid = j.value("valid", c.valid);
  c.test = j.value("test", c.test);
  c.turns = j.value("turns", c.turns);
  c.scene.min_length = j.value("min_length", c.scene.min_length);
  c.scene.max_length = j.value("max_length", c.scene.max_length);
  c.scene.frame_size = j.value("frame_size", c.scene.frame_size);
  c.scene.max_objects = j.value("max_objects", c.scene.max_objects);
  c.validate();
  return c;
}

namespace {

std::vector<DialogRecord> make_split(const CorpusConfig& cfg, const char* name, std::uint64_t tag, int count) {
  std::vector<DialogRecord> out;
  for (int i = 0; i < count; ++i) {
    auto stream = Rng::derive(cfg.seed, tag * 1000003ull + static_cast<std::uint64_t>(i));
    const auto scene_seed = stream.next_u64();
    const auto dialog_seed = stream.next_u64();
    auto params = cfg.scene;
    // Every tenth scene spreads its objects over disjoint time windows, cycling the count.
    if (i % 10 == 0) {
      params.disjoint_lifetimes = true;
      params.forced_count = std::min(params.max_objects, (i / 10) % 4 + 1);
    }
    DialogRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "%s%04d", name, i);
    r.video_id = id;
    r.features = "features/" + r.video_id + ".stfv";
    r.scene = generate_scene(scene_seed, params);
    r.turns = generate_dialog(r.scene, cfg.turns, dialog_seed);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  return {make_split(cfg, "train", 1, cfg.train), make_split(cfg, "valid", 2, cfg.valid), make_split(cfg, "test", 3, cfg.test)};
}

void write_corpus(const Corpus& corpus, const std::string& root, const vid::VideoEncoder<float>& encoder,
                  sampler::Mode mode, std::size_t segment_frames) {
  auto write_split = [&](const std::vector<DialogRecord>& records, const std::string& name, bool refs) {
    std::string lines;
    for (const auto& r : records) {
      sampler::RawVideo video;
      video.id = r.video_id;
      video.frames = render(r.scene);
      sampler::write_features(sampler::extract_features(video, mode, encoder, segment_frames), root + "/" + r.features);
      lines += r.to_json(refs).dump() + "\n";
    }
    binio::write_file(root + "/" + name + ".jsonl", lines);
  };
  write_split(corpus.train, "train", false);
  write_split(corpus.valid, "valid", false);
  write_split(corpus.test, "test", true);
  std::string refs;
  for (const auto& r : corpus.test) {
    for (std::size_t t = 0; t < r.turns.size(); ++t) {
      nlohmann::json j{{"id", r.video_id + "_" + std::to_string(t)}, {"answers", r.turns[t].references}, {"family", r.turns[t].family}};
      refs += j.dump() + "\n";
    }
  }
  binio::write_file(root + "/test_refs.jsonl", refs);
}

std::vector<DialogRecord> read_split(const std::string& path) {
  std::istringstream in(binio::read_file(path));
  std::vector<DialogRecord> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(DialogRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace avsd::synth
