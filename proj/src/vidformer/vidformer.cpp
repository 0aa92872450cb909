#include "avsd/vidformer.hpp"

#include <cmath>

#include "avsd/error.hpp"

namespace avsd::vid {

void EncoderConfig::validate() const {
  if (frames == 0 || patch == 0 || image_size == 0 || width == 0 || heads == 0 || ffn_width == 0) {
    throw ConfigError("encoder: frames, patch, image_size, width, heads and ffn_width must be positive");
  }
  if (image_size % patch != 0) {
    throw ConfigError("encoder: image_size " + std::to_string(image_size) +
                      " is not divisible by patch " + std::to_string(patch));
  }
  if (width % heads != 0) {
    throw ConfigError("encoder: width " + std::to_string(width) + " is not divisible by heads " +
                      std::to_string(heads));
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"frames", frames}, {"image_size", image_size}, {"patch", patch},     {"width", width},
          {"blocks", blocks}, {"heads", heads},           {"ffn_width", ffn_width}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.frames = j.at("frames").get<std::size_t>();
  c.image_size = j.at("image_size").get<std::size_t>();
  c.patch = j.at("patch").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_width = j.at("ffn_width").get<std::size_t>();
  c.validate();
  return c;
}

EncoderConfig EncoderConfig::full_scale() {
  EncoderConfig c;
  c.frames = 32;
  c.image_size = 224;
  c.patch = 16;
  c.width = 768;
  c.blocks = 12;
  c.heads = 12;
  c.ffn_width = 3072;
  return c;
}

PatchSequence patchify(const Clip& clip, const EncoderConfig& cfg) {
  cfg.validate();
  if (clip.size() != cfg.frames) {
    throw DimensionError("patchify: clip has " + std::to_string(clip.size()) + " frames, encoder expects " +
                         std::to_string(cfg.frames));
  }
  const std::size_t side = cfg.image_size / cfg.patch;
  PatchSequence out;
  out.frames = cfg.frames;
  out.patches = side * side;
  out.dim = cfg.patch_dim();
  out.values.reserve(out.frames * out.patches * out.dim);
  for (const auto& f : clip) {
    if (f.width != cfg.image_size || f.height != cfg.image_size) {
      throw DimensionError("patchify: frame is " + std::to_string(f.width) + "x" + std::to_string(f.height) +
                           ", expected " + std::to_string(cfg.image_size) + "x" +
                           std::to_string(cfg.image_size));
    }
    for (std::size_t py = 0; py < side; ++py) {
      for (std::size_t px = 0; px < side; ++px) {
        for (std::size_t y = 0; y < cfg.patch; ++y) {
          for (std::size_t x = 0; x < cfg.patch; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
              out.values.push_back(f.at(px * cfg.patch + x, py * cfg.patch + y, c));
            }
          }
        }
      }
    }
  }
  return out;
}

namespace {

std::string block_name(std::size_t l, const char* part) {
  return "enc.blk" + std::to_string(l) + "." + part;
}

}  // namespace

template <typename T>
VideoEncoder<T>::VideoEncoder(EncoderConfig cfg, ParamStore<T> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  const std::size_t t_count = cfg_.frames, n_count = cfg_.patches_per_frame();

  auto time = std::make_shared<nc::AttentionPattern>();
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t n = 0; n < n_count; ++n) {
      std::vector<std::uint32_t> keys;
      for (std::size_t tt = 0; tt < t_count; ++tt) keys.push_back(static_cast<std::uint32_t>(tt * n_count + n));
      time->add_row(keys);
    }
  }
  time_pattern_ = time;

  auto space = std::make_shared<nc::AttentionPattern>();
  std::vector<std::uint32_t> all;
  for (std::size_t i = 0; i < cfg_.token_count(); ++i) all.push_back(static_cast<std::uint32_t>(i));
  space->add_row(all);
  for (std::size_t t = 0; t < t_count; ++t) {
    std::vector<std::uint32_t> keys{0};
    for (std::size_t n = 0; n < n_count; ++n) keys.push_back(static_cast<std::uint32_t>(1 + t * n_count + n));
    for (std::size_t n = 0; n < n_count; ++n) space->add_row(keys);
  }
  space_pattern_ = space;
}

template <typename T>
VideoEncoder<T> VideoEncoder<T>::init(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamStore<T> p;
  const std::size_t d = cfg.width;
  auto dense = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    p.add_normal(prefix + ".w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    p.add_constant(prefix + ".b", {out}, T(0));
  };
  auto norm = [&](const std::string& prefix) {
    p.add_constant(prefix + ".g", {d}, T(1));
    p.add_constant(prefix + ".b", {d}, T(0));
  };
  dense("enc.patch", cfg.patch_dim(), d);
  p.add_normal("enc.cls", {1, d}, 0.02, rng);
  p.add_normal("enc.pos", {cfg.token_count(), d}, 0.02, rng);
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    norm(block_name(l, "time_ln"));
    dense(block_name(l, "time_qkv"), d, 3 * d);
    dense(block_name(l, "time_out"), d, d);
    norm(block_name(l, "space_ln"));
    dense(block_name(l, "space_qkv"), d, 3 * d);
    dense(block_name(l, "space_out"), d, d);
    norm(block_name(l, "ffn_ln"));
    dense(block_name(l, "ffn1"), d, cfg.ffn_width);
    dense(block_name(l, "ffn2"), cfg.ffn_width, d);
  }
  return VideoEncoder(cfg, std::move(p));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::linear(const nc::Tensor<T>& x, const std::string& prefix) const {
  return nc::linear(x, params_.get(prefix + ".w"), params_.get(prefix + ".b"));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::norm(const nc::Tensor<T>& x, const std::string& prefix) const {
  return nc::layer_norm(x, params_.get(prefix + ".g"), params_.get(prefix + ".b"));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::patches_tensor(const PatchSequence& p) const {
  std::vector<T> v(p.values.begin(), p.values.end());
  return nc::Tensor<T>({p.frames * p.patches, p.dim}, std::move(v));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::embed(const nc::Tensor<T>& patches) const {
  const std::size_t rows = cfg_.token_count() - 1;
  if (patches.rank() != 2 || patches.dim(0) != rows || patches.dim(1) != cfg_.patch_dim()) {
    throw DimensionError("embed: patches " + nc::shape_str(patches.shape()) + ", expected [" +
                         std::to_string(rows) + "x" + std::to_string(cfg_.patch_dim()) + "]");
  }
  auto tokens = nc::concat<T>({params_.get("enc.cls"), linear(patches, "enc.patch")}, 0);
  return nc::add(tokens, params_.get("enc.pos"));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::time_step(const nc::Tensor<T>& state, std::size_t l) const {
  const std::size_t rows = cfg_.token_count() - 1;
  auto cls = nc::slice(state, 0, 0, 1);
  auto patches = nc::slice(state, 0, 1, rows);
  auto qkv = linear(norm(patches, block_name(l, "time_ln")), block_name(l, "time_qkv"));
  auto mixed = linear(nc::attention(qkv, cfg_.heads, time_pattern_), block_name(l, "time_out"));
  return nc::concat<T>({cls, nc::add(patches, mixed)}, 0);
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::space_step(const nc::Tensor<T>& state, std::size_t l) const {
  auto qkv = linear(norm(state, block_name(l, "space_ln")), block_name(l, "space_qkv"));
  auto mixed = linear(nc::attention(qkv, cfg_.heads, space_pattern_), block_name(l, "space_out"));
  return nc::add(state, mixed);
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::ffn_step(const nc::Tensor<T>& state, std::size_t l) const {
  auto h = nc::gelu(linear(norm(state, block_name(l, "ffn_ln")), block_name(l, "ffn1")));
  return nc::add(state, linear(h, block_name(l, "ffn2")));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::block(const nc::Tensor<T>& state, std::size_t l) const {
  return ffn_step(space_step(time_step(state, l), l), l);
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::encode_patches(const nc::Tensor<T>& patches) const {
  auto state = embed(patches);
  for (std::size_t l = 0; l < cfg_.blocks; ++l) state = block(state, l);
  return state;
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::encode_clip(const Clip& clip) const {
  return encode_patches(patches_tensor(patchify(clip, cfg_)));
}

template <typename T>
nc::Tensor<T> VideoEncoder<T>::pool_frame_features(const nc::Tensor<T>& state) const {
  const std::size_t n = cfg_.patches_per_frame();
  if (state.rank() != 2 || state.dim(0) != cfg_.token_count()) {
    throw DimensionError("pool_frame_features: state " + nc::shape_str(state.shape()) + " has wrong token count");
  }
  auto patches = nc::slice(state, 0, 1, cfg_.frames * n);
  return nc::mean(nc::reshape(patches, {cfg_.frames, n, cfg_.width}), 1);
}

template <typename T>
nlohmann::json VideoEncoder<T>::checkpoint_config() const {
  return {{"kind", "encoder"}, {"config", cfg_.to_json()}};
}

VideoEncoder<float> load_encoder(const Checkpoint& ck) {
  if (ck.config.value("kind", "") != "encoder") throw FormatError("checkpoint is not an encoder");
  auto cfg = EncoderConfig::from_json(ck.config.at("config"));
  Rng rng(0);
  auto enc = VideoEncoder<float>::init(cfg, rng);
  import_params(enc.params(), ck.tensors);
  return enc;
}

Checkpoint save_encoder(const VideoEncoder<float>& enc, std::uint64_t seed) {
  Checkpoint ck;
  ck.config = enc.checkpoint_config();
  ck.config["seed"] = seed;
  ck.tensors = export_params(enc.params());
  return ck;
}

template class VideoEncoder<float>;
template class VideoEncoder<double>;

}  // namespace avsd::vid
