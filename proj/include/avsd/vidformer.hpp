#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "avsd/ops.hpp"
#include "avsd/params.hpp"
#include "avsd/rng.hpp"
#include "json.hpp"

namespace avsd::vid {

// One RGB frame, channels interleaved per pixel, values in [0, 1].
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> rgb;

  Frame() = default;
  Frame(std::size_t w, std::size_t h) : width(w), height(h), rgb(w * h * 3, 0.0f) {}
  float& at(std::size_t x, std::size_t y, std::size_t c) { return rgb[(y * width + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
  bool operator==(const Frame&) const = default;
};

using Clip = std::vector<Frame>;

struct EncoderConfig {
  std::size_t frames = 8;       // T
  std::size_t image_size = 32;  // square frames
  std::size_t patch = 8;        // D, patch side in pixels
  std::size_t width = 64;       // d
  std::size_t blocks = 2;       // M
  std::size_t heads = 4;
  std::size_t ffn_width = 256;

  std::size_t patches_per_frame() const {
    const auto side = image_size / patch;
    return side * side;
  }
  std::size_t patch_dim() const { return 3 * patch * patch; }
  std::size_t token_count() const { return frames * patches_per_frame() + 1; }

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);

  // T=32 frames of 224x224 with 16x16 patches, width 768.
  static EncoderConfig full_scale();
};

// Flattened patches x_(t,n): row t*N + n holds 3*D*D values, pixels in
// row-major order within the patch, RGB interleaved per pixel.
struct PatchSequence {
  std::size_t frames = 0;
  std::size_t patches = 0;
  std::size_t dim = 0;
  std::vector<float> values;
};

PatchSequence patchify(const Clip& clip, const EncoderConfig& cfg);

// Divided space-time attention encoder. Token 0 is the classification token;
// token 1 + t*N + n is patch n of frame t.
template <typename T>
class VideoEncoder {
 public:
  VideoEncoder(EncoderConfig cfg, ParamStore<T> params);

  // Projection weights use fan-in scaling, positional and CLS tables N(0, 0.02).
  static VideoEncoder init(const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  nc::Tensor<T> patches_tensor(const PatchSequence& p) const;

  // Level-0 state [T*N+1 x d].
  nc::Tensor<T> embed(const nc::Tensor<T>& patches) const;

  // Sub-steps of block `l`, each pre-norm with a residual connection.
  // Time: (t,n) attends over {(t',n)}; CLS passes through unchanged.
  nc::Tensor<T> time_step(const nc::Tensor<T>& state, std::size_t l) const;
  // Space: (t,n) attends over CLS and {(t,n')}; CLS attends over every token.
  nc::Tensor<T> space_step(const nc::Tensor<T>& state, std::size_t l) const;
  nc::Tensor<T> ffn_step(const nc::Tensor<T>& state, std::size_t l) const;
  nc::Tensor<T> block(const nc::Tensor<T>& state, std::size_t l) const;

  nc::Tensor<T> encode_patches(const nc::Tensor<T>& patches) const;
  nc::Tensor<T> encode_clip(const Clip& clip) const;

  // Mean over the N patch tokens of each frame, CLS excluded: [T x d].
  nc::Tensor<T> pool_frame_features(const nc::Tensor<T>& state) const;

  nlohmann::json checkpoint_config() const;

 private:
  nc::Tensor<T> linear(const nc::Tensor<T>& x, const std::string& prefix) const;
  nc::Tensor<T> norm(const nc::Tensor<T>& x, const std::string& prefix) const;

  EncoderConfig cfg_;
  ParamStore<T> params_;
  std::shared_ptr<const nc::AttentionPattern> time_pattern_;
  std::shared_ptr<const nc::AttentionPattern> space_pattern_;
};

// Loads an encoder saved through checkpoint_config() + export_params().
VideoEncoder<float> load_encoder(const Checkpoint& ck);
Checkpoint save_encoder(const VideoEncoder<float>& enc, std::uint64_t seed);

extern template class VideoEncoder<float>;
extern template class VideoEncoder<double>;

}  // namespace avsd::vid
