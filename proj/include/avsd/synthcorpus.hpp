#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsd/rng.hpp"
#include "avsd/sampler.hpp"
#include "avsd/vidformer.hpp"
#include "json.hpp"

namespace avsd::synth {

enum class Color { kRed, kGreen, kBlue, kYellow };
enum class Motion { kLeft, kRight, kUp, kDown, kStatic };

const char* color_name(Color c);
const char* motion_name(Motion m);

struct ObjectSpec {
  Color color = Color::kRed;
  int size = 4;          // square side in pixels
  Motion motion = Motion::kStatic;
  int distance = 0;      // pixels travelled over the lifetime
  int x0 = 0, y0 = 0;    // top-left corner at entry
  int entry = 0, exit = 0;  // inclusive frame range

  bool alive(int frame) const { return frame >= entry && frame <= exit; }
  // Top-left corner at `frame`, interpolated linearly over the lifetime.
  std::pair<int, int> position(int frame) const;
  bool operator==(const ObjectSpec&) const = default;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int length = 16;
  int frame_size = 32;
  std::vector<ObjectSpec> objects;

  bool operator==(const SceneSpec&) const = default;
  nlohmann::json to_json() const;
  static SceneSpec from_json(const nlohmann::json& j);
};

struct SceneParams {
  int min_length = 16;
  int max_length = 96;
  int frame_size = 32;
  int max_objects = 4;
  // Every lifetime must cover one frame of fixed sampling at this count.
  int sampled_frames = 8;
  // 0 picks the count at random.
  int forced_count = 0;
  // Lifetimes laid end to end so no frame shows every object.
  bool disjoint_lifetimes = false;
};

SceneSpec generate_scene(std::uint64_t seed, const SceneParams& params);
vid::Clip render(const SceneSpec& scene);

struct Turn {
  std::string question;
  std::string answer;
  std::string family;
  std::vector<std::string> references;  // paraphrases, first equals `answer`
};

struct DialogRecord {
  std::string video_id;
  std::string features;  // path relative to the corpus root
  SceneSpec scene;
  std::vector<Turn> turns;

  nlohmann::json to_json(bool with_references) const;
  static DialogRecord from_json(const nlohmann::json& j);
};

std::string number_word(int n);

// Counting question always present; other families only when applicable.
std::vector<Turn> generate_dialog(const SceneSpec& scene, int turns, std::uint64_t seed);

struct CorpusConfig {
  std::uint64_t seed = 7;
  int train = 800;
  int valid = 100;
  int test = 100;
  int turns = 3;
  SceneParams scene;

  void validate() const;
  nlohmann::json to_json() const;
  static CorpusConfig from_json(const nlohmann::json& j);
};

struct Corpus {
  std::vector<DialogRecord> train, valid, test;
};

// Scenes and dialogs only; deterministic in the config.
Corpus generate_corpus(const CorpusConfig& cfg);

// Writes <split>.jsonl, features/<id>.stfv and test_refs.jsonl under root.
void write_corpus(const Corpus& corpus, const std::string& root, const vid::VideoEncoder<float>& encoder,
                  sampler::Mode mode, std::size_t segment_frames = 0);

std::vector<DialogRecord> read_split(const std::string& path);

}  // namespace avsd::synth
