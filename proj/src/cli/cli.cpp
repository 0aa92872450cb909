#include "avsd/cli.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "avsd/binio.hpp"
#include "avsd/error.hpp"
#include "avsd/optim.hpp"
#include "avsd/scorer.hpp"

namespace avsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kEncoderTag = 0x656e636f646572;  // "encoder"

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

bool same_kind(const json& base, const json& user) {
  if (base.is_number_float()) return user.is_number();
  // Every integer setting is a count, size or seed.
  if (base.is_number_integer()) return user.is_number_unsigned() || (user.is_number_integer() && user.get<long long>() >= 0);
  return base.type() == user.type();
}

json merge_at(const json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: " + (path.empty() ? std::string("document") : path) + " must be an object");
  json out = base;
  for (const auto& [key, value] : user.items()) {
    const auto where = join_path(path, key);
    if (!base.contains(key)) throw ConfigError("config: unknown key " + where);
    const auto& b = base.at(key);
    if (b.is_object()) {
      out[key] = merge_at(b, value, where);
    } else if (!same_kind(b, value)) {
      throw ConfigError("config: " + where + " expects a " + std::string(b.type_name()) + ", got " + value.type_name());
    } else {
      out[key] = value;
    }
  }
  return out;
}

void write_json(const std::string& path, const json& j) { binio::write_file(path, j.dump(2) + "\n"); }

// The effective config lands next to every artifact it produced.
void echo_config(const std::string& dir, const json& cfg) { write_json((fs::path(dir) / "config.json").string(), cfg); }

synth::CorpusConfig corpus_config(const json& cfg) {
  auto c = synth::CorpusConfig::from_json(cfg.at("corpus"));
  c.scene.sampled_frames = static_cast<int>(cfg.at("encoder").at("frames").get<std::size_t>());
  return c;
}

sampler::Mode feature_mode(const json& cfg) { return sampler::parse_mode(cfg.at("encoder").at("mode").get<std::string>()); }

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

dec::DialogContext make_context(const sampler::FrameFeatures& video, const std::vector<dec::Turn>& history,
                                const std::string& question, const text::Vocab& vocab) {
  dec::DialogContext ctx;
  ctx.video = video;
  ctx.history = history;
  ctx.question = text::encode(question, vocab);
  return ctx;
}

// A decoder, plus its own encoder when the checkpoint was trained jointly.
struct LoadedModel {
  dec::FusionDecoder<float> decoder;
  std::optional<vid::VideoEncoder<float>> encoder;
  sampler::Mode mode = sampler::Mode::kFixed;
  std::size_t segment_frames = 0;
};

std::vector<LoadedModel> load_models(const std::vector<std::string>& paths, std::size_t vocab_size) {
  if (paths.empty()) throw ConfigError("generate: --checkpoints lists no files");
  std::vector<LoadedModel> models;
  for (const auto& p : paths) {
    const auto ck = Checkpoint::load(p);
    if (ck.config.value("kind", "") == "joint") {
      auto m = dec::load_joint(ck);
      models.push_back({m.decoder(), m.encoder(), m.mode(), m.segment_frames()});
    } else {
      models.push_back({dec::load_decoder(ck), std::nullopt});
    }
    if (models.back().decoder.config().vocab_size != vocab_size) {
      throw ConfigError("generate: " + p + " has vocabulary " + std::to_string(models.back().decoder.config().vocab_size) +
                        ", data has " + std::to_string(vocab_size));
    }
  }
  return models;
}

sampler::RawVideo raw_video(const synth::DialogRecord& r) {
  sampler::RawVideo v;
  v.id = r.video_id;
  v.frames = synth::render(r.scene);
  return v;
}

// Frame features as model `m` sees them: its own encoder, or the feature file.
sampler::FrameFeatures features_for(const LoadedModel& m, const synth::DialogRecord& r, const sampler::RawVideo& raw,
                                    const std::string& root) {
  if (!m.encoder) return sampler::read_features(root + "/" + r.features);
  return sampler::extract_features(raw, m.mode, *m.encoder, m.segment_frames);
}

// One context per ensemble member; they differ only in the video rows.
search::DecodeResult answer(const std::vector<LoadedModel>& models, const std::vector<dec::DialogContext>& contexts,
                            const search::DecodeConfig& dc) {
  std::vector<search::DecoderModel> members;
  members.reserve(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) members.emplace_back(models[k].decoder, contexts[k]);
  std::vector<const search::NextTokenModel*> ptrs;
  for (const auto& m : members) ptrs.push_back(&m);
  return search::beam_search(search::Ensemble(ptrs), dc);
}

search::DecodeConfig decode_config(const json& cfg) {
  auto dc = search::DecodeConfig::from_json(cfg.at("decode"));
  dc.eos = text::kEos;
  return dc;
}

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string features;
  std::string split = "test";
  std::string checkpoints;
  std::string pred;
  std::string refs;
  std::string video;
  bool interactive = false;
  // Flag overrides, written into the config before validation.
  std::map<std::string, json> overrides;
};

json effective_config(const Options& o) {
  auto cfg = load_config(o.config);
  for (const auto& [path, value] : o.overrides) {
    const auto dot = path.find('.');
    cfg = merge_config(cfg, json{{path.substr(0, dot), {{path.substr(dot + 1), value}}}});
  }
  // Fail early on values the module configs reject.
  corpus_config(cfg);
  vid::EncoderConfig::from_json(cfg.at("encoder"));
  feature_mode(cfg);
  auto tc = cfg.at("train");
  if (tc.at("epochs").get<std::size_t>() == 0) tc["epochs"] = 1;
  opt::TrainConfig::from_json(tc);
  const auto how = tc.at("encoder").get<std::string>();
  if (how != "joint" && how != "frozen") throw ConfigError("config: train.encoder must be joint or frozen, got " + how);
  decode_config(cfg);
  return cfg;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  const auto cfg = effective_config(o);
  const auto cc = corpus_config(cfg);
  const auto ec = vid::EncoderConfig::from_json(cfg.at("encoder"));
  const auto enc_seed = cfg.at("encoder").at("seed").get<std::uint64_t>();
  auto rng = Rng::derive(enc_seed, kEncoderTag);
  const auto encoder = vid::VideoEncoder<float>::init(ec, rng);

  const auto corpus = synth::generate_corpus(cc);
  fs::create_directories(o.out);
  synth::write_corpus(corpus, o.out, encoder, feature_mode(cfg), cfg.at("encoder").at("segment_frames").get<std::size_t>());
  vid::save_encoder(encoder, enc_seed).save(o.out + "/encoder.ckpt");

  std::vector<std::string> lines;
  for (const auto& r : corpus.train) {
    for (const auto& t : r.turns) {
      lines.push_back(t.question);
      lines.push_back(t.answer);
    }
  }
  text::train_vocab(lines, cfg.at("corpus").at("vocab_size").get<std::size_t>()).save(o.out + "/vocab.txt");
  echo_config(o.out, cfg);
  out << "videos " << corpus.train.size() + corpus.valid.size() + corpus.test.size() << " -> " << o.out << "\n";
  return kExitOk;
}

int cmd_extract(const Options& o, std::ostream& out) {
  const auto cfg = effective_config(o);
  const auto root = o.out.empty() ? o.data : o.out;
  const auto encoder = vid::load_encoder(Checkpoint::load(o.data + "/encoder.ckpt"));
  const auto mode = feature_mode(cfg);
  const auto seg = cfg.at("encoder").at("segment_frames").get<std::size_t>();
  std::size_t count = 0;
  for (const char* split : {"train", "valid", "test"}) {
    for (const auto& r : synth::read_split(o.data + "/" + split + ".jsonl")) {
      sampler::RawVideo video;
      video.id = r.video_id;
      video.frames = synth::render(r.scene);
      sampler::write_features(sampler::extract_features(video, mode, encoder, seg), root + "/" + r.features);
      ++count;
    }
  }
  echo_config(root, cfg);
  out << "features " << count << " (" << sampler::mode_name(mode) << ") -> " << root << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const auto cfg = effective_config(o);
  const auto vocab = text::Vocab::load(o.data + "/vocab.txt");
  const auto records = synth::read_split(o.data + "/train.jsonl");
  const auto dc = decoder_config(cfg, vocab.size());
  const auto& tj = cfg.at("train");
  const bool joint = tj.at("encoder").get<std::string>() == "joint";
  const auto variants = tj.at("variants").get<std::size_t>();
  const auto epochs = tj.at("epochs").get<std::size_t>();
  const auto base_seed = tj.at("seed").get<std::uint64_t>();
  if (variants == 0) throw ConfigError("train: variants must be at least 1");

  // Joint training starts every variant from the encoder that produced the features.
  std::optional<vid::VideoEncoder<float>> encoder;
  std::vector<sampler::EncoderInput> inputs;
  TurnSet turns;
  if (joint) {
    encoder = vid::load_encoder(Checkpoint::load(o.data + "/encoder.ckpt"));
    if (encoder->config().width != dc.feature_width) {
      throw ConfigError("train: encoder.ckpt has width " + std::to_string(encoder->config().width) +
                        ", encoder.width is " + std::to_string(dc.feature_width));
    }
    const auto mode = feature_mode(cfg);
    const auto seg = cfg.at("encoder").at("segment_frames").get<std::size_t>();
    for (const auto& r : records) inputs.push_back(sampler::prepare_input(raw_video(r), mode, encoder->config(), seg));
    // Contexts only need the row count and width here; values are never read.
    turns = load_turns(records, [&](std::size_t i) {
      sampler::FrameFeatures f;
      f.mode = mode;
      f.video_id = records[i].video_id;
      f.frames = inputs[i].rows();
      f.width = dc.feature_width;
      f.values.assign(f.frames * f.width, 0.0f);
      return f;
    }, vocab);
  } else {
    const auto root = o.features.empty() ? o.data : o.features;
    turns = load_turns(records, root, vocab);
  }
  if (turns.contexts.empty()) throw InputError("train: " + o.data + "/train.jsonl holds no turns");
  if (turns.contexts.front().video.width != dc.feature_width) {
    throw ConfigError("train: features have width " + std::to_string(turns.contexts.front().video.width) +
                      ", encoder.width is " + std::to_string(dc.feature_width));
  }
  fs::create_directories(o.out);
  echo_config(o.out, cfg);

  std::optional<opt::TrainConfig> tc;
  if (epochs > 0) tc = opt::TrainConfig::from_json(tj);
  for (std::size_t k = 0; k < variants; ++k) {
    const auto seed = base_seed + k;
    const auto dir = variants == 1 ? o.out : o.out + "/seed" + std::to_string(seed);
    fs::create_directories(dir);
    auto decoder = opt::init_decoder(dc, seed);
    std::optional<dec::VideoDialogModel<float>> model;
    if (joint) {
      // Fresh encoder copy per variant: parameter tensors alias on copy.
      model.emplace(vid::load_encoder(Checkpoint::load(o.data + "/encoder.ckpt")), std::move(decoder),
                    feature_mode(cfg), cfg.at("encoder").at("segment_frames").get<std::size_t>());
    }
    // Zero epochs saves the initial weights: the untrained baseline.
    if (epochs == 0) {
      const json meta{{"seed", seed}, {"step", 0}};
      (model ? dec::save_joint(*model, meta) : dec::save_decoder(decoder, meta)).save(dir + "/model.ckpt");
      binio::write_file(dir + "/loss.csv", "step,loss\n");
      out << "seed " << seed << " untrained -> " << dir << "/model.ckpt\n";
      continue;
    }
    auto run_cfg = *tc;
    run_cfg.seed = seed;
    opt::TrainResult r;
    if (model) {
      std::vector<dec::JointExample> examples;
      for (std::size_t i = 0; i < turns.contexts.size(); ++i) {
        examples.push_back({&inputs[turns.video[i]], &turns.contexts[i], turns.responses[i]});
      }
      r = opt::train(*model, examples, run_cfg, dir);
    } else {
      r = opt::train(decoder, turns.examples(), run_cfg, dir);
    }
    out << "seed " << seed << " steps " << r.steps << " final_loss " << r.losses.back() << " -> " << dir
        << "/model.ckpt\n";
  }
  return kExitOk;
}

int cmd_generate(const Options& o, std::istream& in, std::ostream& out) {
  const auto cfg = effective_config(o);
  const auto dcfg = decode_config(cfg);
  const auto vocab = text::Vocab::load(o.data + "/vocab.txt");
  const auto models = load_models(split_list(o.checkpoints), vocab.size());
  const auto root = o.features.empty() ? o.data : o.features;

  if (o.interactive) {
    if (o.video.empty()) throw ConfigError("generate: --interactive needs --video");
    std::optional<synth::DialogRecord> record;
    for (const char* split : {"train", "valid", "test"}) {
      for (auto& r : synth::read_split(o.data + "/" + split + ".jsonl")) {
        if (r.video_id == o.video) record = std::move(r);
      }
    }
    if (!record) throw InputError("generate: no video " + o.video + " in " + o.data);
    const auto raw = raw_video(*record);
    std::vector<sampler::FrameFeatures> videos;
    for (const auto& m : models) videos.push_back(features_for(m, *record, raw, root));
    std::vector<dec::Turn> history;
    std::string line;
    while (std::getline(in, line)) {
      if (text::normalize(line).empty()) continue;
      std::vector<dec::DialogContext> contexts;
      for (const auto& v : videos) contexts.push_back(make_context(v, history, line, vocab));
      const auto result = answer(models, contexts, dcfg);
      out << text::decode(result.tokens, vocab) << "\n" << std::flush;
      history.push_back({contexts.front().question, result.tokens});
    }
    return kExitOk;
  }

  if (o.out.empty()) throw ConfigError("generate: --out is required unless --interactive");
  const auto records = synth::read_split(o.data + "/" + o.split + ".jsonl");
  std::string lines;
  std::size_t count = 0;
  for (const auto& r : records) {
    const auto raw = raw_video(r);
    std::vector<TurnSet> per_model;
    for (const auto& m : models) {
      const auto video = features_for(m, r, raw, root);
      per_model.push_back(load_turns({r}, [&](std::size_t) { return video; }, vocab));
    }
    for (std::size_t t = 0; t < r.turns.size(); ++t) {
      std::vector<dec::DialogContext> contexts;
      for (const auto& set : per_model) contexts.push_back(set.contexts[t]);
      const auto result = answer(models, contexts, dcfg);
      lines += json{{"id", per_model.front().ids[t]}, {"answer", text::decode(result.tokens, vocab)}}.dump() + "\n";
      ++count;
    }
  }
  binio::write_file(o.out, lines);
  const auto dir = fs::path(o.out).parent_path();
  write_json((dir / (fs::path(o.out).stem().string() + ".config.json")).string(), cfg);
  out << "predictions " << count << " -> " << o.out << "\n";
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto report = score::evaluate_run(o.pred, o.refs);
  out << report.to_text();
  if (!o.out.empty()) write_json(o.out, report.to_json());
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case Error::Kind::kConfig: return kExitConfig;
    case Error::Kind::kFormat:
    case Error::Kind::kIo: return kExitIo;
    case Error::Kind::kDivergence: return kExitDivergence;
    default: return kExitFailure;
  }
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, const json& extra = {}) {
  json j{{"error", kind}, {"message", message}};
  if (extra.is_object()) j.update(extra);
  err << j.dump() << "\n";
}

}  // namespace

json default_config() {
  return {
      {"corpus",
       {{"seed", 7}, {"train", 800}, {"valid", 100}, {"test", 100}, {"turns", 3}, {"min_length", 16},
        {"max_length", 96}, {"frame_size", 32}, {"max_objects", 4}, {"vocab_size", 200}}},
      {"encoder",
       {{"frames", 8}, {"image_size", 32}, {"patch", 8}, {"width", 64}, {"blocks", 2}, {"heads", 4},
        {"ffn_width", 256}, {"seed", 11}, {"mode", "fixed"}, {"segment_frames", 0}}},
      {"decoder", {{"blocks", 2}, {"width", 64}, {"heads", 4}, {"ffn_width", 256}, {"max_positions", 256}}},
      {"train",
       {{"batch_size", 4}, {"epochs", 4}, {"lr", 3e-4}, {"weight_decay", 0.01}, {"clip_norm", 1.0}, {"seed", 1},
        {"checkpoint_every", 0}, {"variants", 1}, {"encoder", "joint"}}},
      {"decode", {{"beam", 5}, {"max_length", 20}, {"alpha", 0.3}}},
  };
}

json merge_config(const json& base, const json& user) { return merge_at(base, user, ""); }

json load_config(const std::string& path) {
  if (path.empty()) return default_config();
  const auto text = binio::read_file(path);
  json user;
  try {
    user = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return merge_config(default_config(), user);
}

std::vector<dec::Example> TurnSet::examples() const {
  std::vector<dec::Example> out;
  out.reserve(contexts.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) out.push_back({&contexts[i], responses[i]});
  return out;
}

TurnSet load_turns(const std::vector<synth::DialogRecord>& records,
                   const std::function<sampler::FrameFeatures(std::size_t)>& video_of, const text::Vocab& vocab) {
  TurnSet set;
  for (std::size_t v = 0; v < records.size(); ++v) {
    const auto& r = records[v];
    const auto video = video_of(v);
    std::vector<dec::Turn> history;
    for (std::size_t t = 0; t < r.turns.size(); ++t) {
      auto ctx = make_context(video, history, r.turns[t].question, vocab);
      auto reply = text::encode(r.turns[t].answer, vocab);
      history.push_back({ctx.question, reply});
      reply.push_back(text::kEos);
      set.contexts.push_back(std::move(ctx));
      set.responses.push_back(std::move(reply));
      set.ids.push_back(r.video_id + "_" + std::to_string(t));
      set.families.push_back(r.turns[t].family);
      set.video.push_back(v);
    }
  }
  return set;
}

TurnSet load_turns(const std::vector<synth::DialogRecord>& records, const std::string& features_root,
                   const text::Vocab& vocab) {
  return load_turns(records, [&](std::size_t v) { return sampler::read_features(features_root + "/" + records[v].features); },
                    vocab);
}

dec::DecoderConfig decoder_config(const json& cfg, std::size_t vocab_size) {
  const auto& d = cfg.at("decoder");
  dec::DecoderConfig c;
  c.blocks = d.at("blocks").get<std::size_t>();
  c.width = d.at("width").get<std::size_t>();
  c.heads = d.at("heads").get<std::size_t>();
  c.ffn_width = d.at("ffn_width").get<std::size_t>();
  c.max_positions = d.at("max_positions").get<std::size_t>();
  c.feature_width = cfg.at("encoder").at("width").get<std::size_t>();
  c.vocab_size = vocab_size;
  c.validate();
  return c;
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-grounded dialog answer generation on a synthetic corpus"};
  app.require_subcommand(1);
  Options o;

  auto sizet = [&](CLI::App* sub, const std::string& flag, const std::string& path, const std::string& help) {
    sub->add_option_function<std::size_t>(flag, [&o, path](const std::size_t& v) { o.overrides[path] = v; }, help);
  };
  auto real = [&](CLI::App* sub, const std::string& flag, const std::string& path, const std::string& help) {
    sub->add_option_function<double>(flag, [&o, path](const double& v) { o.overrides[path] = v; }, help);
  };

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus, encoder, features and vocabulary");
  gen->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  gen->add_option("--out", o.out, "Output directory")->required();
  sizet(gen, "--seed", "corpus.seed", "Corpus seed");

  auto* ext = app.add_subcommand("extract", "Re-extract frame features for every video");
  ext->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  ext->add_option("--data", o.data, "Corpus directory")->required();
  ext->add_option("--out", o.out, "Feature root (defaults to the corpus directory)");
  ext->add_option_function<std::string>("--mode", [&o](const std::string& v) { o.overrides["encoder.mode"] = v; },
                                        "fixed | variable");
  sizet(ext, "--segment-frames", "encoder.segment_frames", "Source frames per segment in variable mode");

  auto* tr = app.add_subcommand("train", "Train the fusion decoder");
  tr->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  tr->add_option("--data", o.data, "Corpus directory")->required();
  tr->add_option("--features", o.features, "Feature root (defaults to the corpus directory)");
  tr->add_option("--out", o.out, "Output directory")->required();
  sizet(tr, "--seed", "train.seed", "Initialisation and shuffling seed");
  sizet(tr, "--variants", "train.variants", "Number of seed variants (seed, seed+1, ...)");
  sizet(tr, "--epochs", "train.epochs", "Epochs; 0 saves the untrained initialisation");
  sizet(tr, "--batch-size", "train.batch_size", "Examples per step");
  tr->add_option_function<std::string>("--encoder", [&o](const std::string& v) { o.overrides["train.encoder"] = v; },
                                       "joint (train the encoder too) | frozen (read feature files)");
  real(tr, "--lr", "train.lr", "Learning rate");

  auto* ge = app.add_subcommand("generate", "Decode answers with beam search over an ensemble");
  ge->add_option("--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  ge->add_option("--data", o.data, "Corpus directory")->required();
  ge->add_option("--features", o.features, "Feature root (defaults to the corpus directory)");
  ge->add_option("--checkpoints", o.checkpoints, "Comma-separated decoder checkpoints")->required();
  ge->add_option("--split", o.split, "Split to decode")->check(CLI::IsMember({"train", "valid", "test"}));
  ge->add_option("--out", o.out, "Predictions file (JSONL)");
  sizet(ge, "--beam", "decode.beam", "Beam width");
  sizet(ge, "--max-len", "decode.max_length", "Maximum response length");
  real(ge, "--alpha", "decode.alpha", "Length penalty exponent");
  ge->add_flag("--interactive", o.interactive, "Read questions from standard input");
  ge->add_option("--video", o.video, "Video id for --interactive");

  auto* ev = app.add_subcommand("evaluate", "Score predictions against references");
  ev->add_option("--pred", o.pred, "Predictions (JSONL)")->required();
  ev->add_option("--refs", o.refs, "References (JSONL)")->required();
  ev->add_option("--out", o.out, "Report file (JSON)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (ext->parsed()) return cmd_extract(o, out);
    if (tr->parsed()) return cmd_train(o, out);
    if (ge->parsed()) return cmd_generate(o, in, out);
    return cmd_evaluate(o, out);
  } catch (const DivergenceError& e) {
    report_error(err, e.kind_name(), e.what(), {{"step", e.step()}});
    return kExitDivergence;
  } catch (const Error& e) {
    report_error(err, e.kind_name(), e.what());
    return exit_code(e);
  } catch (const json::exception& e) {
    report_error(err, "format", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    report_error(err, "io", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return kExitFailure;
  }
}

}  // namespace avsd::cli
