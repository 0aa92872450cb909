#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avsd/vidformer.hpp"

namespace avsd::sampler {

struct RawVideo {
  std::string id;
  double fps = 15.0;
  vid::Clip frames;
};

enum class Mode : std::uint8_t { kFixed = 0, kVariable = 1 };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);  // "fixed" | "variable", ConfigError otherwise

struct FrameFeatures {
  Mode mode = Mode::kFixed;
  std::string video_id;
  std::size_t frames = 0;  // I
  std::size_t width = 0;   // d
  std::vector<float> values;  // I x d, row-major

  bool operator==(const FrameFeatures&) const = default;
};

// idx(i) = floor(i * length / count); repeats when length < count.
std::vector<std::size_t> fixed_indices(std::size_t length, std::size_t count);

// Nearest-neighbour resize to a square of side `size`.
vid::Frame resize_nearest(const vid::Frame& f, std::size_t size);

vid::Clip sample_fixed(const vid::Clip& video, std::size_t count, std::size_t image_size);

struct SegmentPlan {
  std::vector<vid::Clip> segments;
  std::size_t copies = 0;  // trailing outputs of the last segment that come only from padding
};

// Segments of `segment_frames` source frames; the last one is padded with its final frame.
SegmentPlan sample_variable(const vid::Clip& video, std::size_t count, std::size_t segment_frames,
                            std::size_t image_size);

// Number of outputs of a padded segment whose index falls past `real` source frames.
std::size_t padded_outputs(std::size_t real, std::size_t segment_frames, std::size_t count);

// Sampled clips ready for the encoder, plus how many pooled rows each keeps.
struct EncoderInput {
  std::vector<vid::Clip> clips;
  std::vector<std::size_t> keep;
  std::size_t rows() const;
};

// segment_frames == 0 means "same as the encoder frame count".
EncoderInput prepare_input(const RawVideo& video, Mode mode, const vid::EncoderConfig& cfg,
                           std::size_t segment_frames = 0);

// Pooled frame features [I x d], differentiable with respect to the encoder.
template <typename T>
nc::Tensor<T> encode_input(const vid::VideoEncoder<T>& enc, const EncoderInput& input);

FrameFeatures extract_features(const RawVideo& video, Mode mode, const vid::VideoEncoder<float>& enc,
                               std::size_t segment_frames = 0);

std::string serialize_features(const FrameFeatures& f);
FrameFeatures parse_features(std::string_view bytes, const std::string& source);
void write_features(const FrameFeatures& f, const std::string& path);
FrameFeatures read_features(const std::string& path);

}  // namespace avsd::sampler
