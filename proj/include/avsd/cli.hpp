#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "avsd/fusiondec.hpp"
#include "avsd/search.hpp"
#include "avsd/synthcorpus.hpp"
#include "avsd/textpiece.hpp"
#include "json.hpp"

namespace avsd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitDivergence = 4;

// Desk-scale defaults for every section; the schema other configs are checked against.
nlohmann::json default_config();

// Overlays `user` onto the defaults. Unknown keys and type changes raise
// ConfigError naming the key path, e.g. "train.lr".
nlohmann::json merge_config(const nlohmann::json& base, const nlohmann::json& user);
nlohmann::json load_config(const std::string& path);  // defaults when path is empty

// One decoder example per dialog turn, history = earlier ground-truth turns.
struct TurnSet {
  std::vector<dec::DialogContext> contexts;
  std::vector<text::TokenIds> responses;  // answer + eos
  std::vector<std::string> ids;           // <video>_<turn>
  std::vector<std::string> families;
  std::vector<std::size_t> video;         // index of the source record

  std::vector<dec::Example> examples() const;
};

TurnSet load_turns(const std::vector<synth::DialogRecord>& records, const std::string& features_root,
                   const text::Vocab& vocab);
// `video_of(i)` supplies the frame features of records[i].
TurnSet load_turns(const std::vector<synth::DialogRecord>& records,
                   const std::function<sampler::FrameFeatures(std::size_t)>& video_of, const text::Vocab& vocab);

dec::DecoderConfig decoder_config(const nlohmann::json& cfg, std::size_t vocab_size);

// Runs a subcommand. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace avsd::cli
