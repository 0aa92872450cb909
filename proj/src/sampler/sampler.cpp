#include "avsd/sampler.hpp"

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd::sampler {

namespace {
constexpr std::string_view kMagic = "STFV";
constexpr std::uint32_t kVersion = 1;

void require_frames(const vid::Clip& video, const char* op) {
  if (video.empty()) throw InputError(std::string(op) + ": video has no frames");
}
}  // namespace

const char* mode_name(Mode m) { return m == Mode::kFixed ? "fixed" : "variable"; }

Mode parse_mode(const std::string& s) {
  if (s == "fixed") return Mode::kFixed;
  if (s == "variable") return Mode::kVariable;
  throw ConfigError("unknown extraction mode '" + s + "' (expected fixed or variable)");
}

std::vector<std::size_t> fixed_indices(std::size_t length, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i * length / count;
  return idx;
}

vid::Frame resize_nearest(const vid::Frame& f, std::size_t size) {
  if (f.width == size && f.height == size) return f;
  vid::Frame out(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    const std::size_t sy = y * f.height / size;
    for (std::size_t x = 0; x < size; ++x) {
      const std::size_t sx = x * f.width / size;
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = f.at(sx, sy, c);
    }
  }
  return out;
}

vid::Clip sample_fixed(const vid::Clip& video, std::size_t count, std::size_t image_size) {
  require_frames(video, "sample_fixed");
  vid::Clip out;
  out.reserve(count);
  for (auto i : fixed_indices(video.size(), count)) out.push_back(resize_nearest(video[i], image_size));
  return out;
}

std::size_t padded_outputs(std::size_t real, std::size_t segment_frames, std::size_t count) {
  std::size_t n = 0;
  for (auto i : fixed_indices(segment_frames, count)) n += i >= real ? 1 : 0;
  return n;
}

SegmentPlan sample_variable(const vid::Clip& video, std::size_t count, std::size_t segment_frames,
                            std::size_t image_size) {
  require_frames(video, "sample_variable");
  if (segment_frames == 0) throw ConfigError("sample_variable: segment length must be positive");
  const std::size_t length = video.size();
  const std::size_t segments = (length + segment_frames - 1) / segment_frames;
  SegmentPlan plan;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = s * segment_frames;
    const std::size_t end = std::min(begin + segment_frames, length);
    vid::Clip seg(video.begin() + static_cast<std::ptrdiff_t>(begin), video.begin() + static_cast<std::ptrdiff_t>(end));
    while (seg.size() < segment_frames) seg.push_back(seg.back());
    plan.segments.push_back(sample_fixed(seg, count, image_size));
    if (s + 1 == segments) plan.copies = padded_outputs(end - begin, segment_frames, count);
  }
  return plan;
}

std::size_t EncoderInput::rows() const {
  std::size_t n = 0;
  for (auto k : keep) n += k;
  return n;
}

EncoderInput prepare_input(const RawVideo& video, Mode mode, const vid::EncoderConfig& cfg,
                           std::size_t segment_frames) {
  EncoderInput in;
  if (mode == Mode::kFixed) {
    in.clips.push_back(sample_fixed(video.frames, cfg.frames, cfg.image_size));
    in.keep.push_back(cfg.frames);
    return in;
  }
  auto plan = sample_variable(video.frames, cfg.frames, segment_frames ? segment_frames : cfg.frames, cfg.image_size);
  for (std::size_t s = 0; s < plan.segments.size(); ++s) {
    const bool last = s + 1 == plan.segments.size();
    in.keep.push_back(last ? cfg.frames - plan.copies : cfg.frames);
    in.clips.push_back(std::move(plan.segments[s]));
  }
  return in;
}

template <typename T>
nc::Tensor<T> encode_input(const vid::VideoEncoder<T>& enc, const EncoderInput& input) {
  if (input.clips.empty()) throw InputError("encode_input: no clips");
  std::vector<nc::Tensor<T>> parts;
  for (std::size_t s = 0; s < input.clips.size(); ++s) {
    auto pooled = enc.pool_frame_features(enc.encode_clip(input.clips[s]));
    if (input.keep[s] != pooled.dim(0)) pooled = nc::slice(pooled, 0, 0, input.keep[s]);
    parts.push_back(pooled);
  }
  return parts.size() == 1 ? parts[0] : nc::concat(parts, 0);
}

FrameFeatures extract_features(const RawVideo& video, Mode mode, const vid::VideoEncoder<float>& enc,
                               std::size_t segment_frames) {
  nc::NoGradGuard no_grad;
  auto rows = encode_input(enc, prepare_input(video, mode, enc.config(), segment_frames));
  FrameFeatures out;
  out.mode = mode;
  out.video_id = video.id;
  out.width = enc.config().width;
  out.frames = rows.dim(0);
  out.values.assign(rows.data().begin(), rows.data().end());
  return out;
}

std::string serialize_features(const FrameFeatures& f) {
  if (f.frames == 0 || f.values.size() != f.frames * f.width) {
    throw InputError("write_features: " + std::to_string(f.values.size()) + " values do not fill " +
                     std::to_string(f.frames) + "x" + std::to_string(f.width));
  }
  binio::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(f.mode));
  w.u32(static_cast<std::uint32_t>(f.frames));
  w.u32(static_cast<std::uint32_t>(f.width));
  for (float v : f.values) w.f32(v);
  w.str(f.video_id);
  return w.buffer();
}

FrameFeatures parse_features(std::string_view bytes, const std::string& source) {
  binio::Reader r(bytes, source);
  if (r.bytes(4) != kMagic) {
    binio::Reader at_start(bytes, source);
    at_start.fail("bad magic");
  }
  const auto version_at = r.offset();
  if (r.u32() != kVersion) throw FormatError(source + ": unsupported version at offset " + std::to_string(version_at));
  const auto mode_at = r.offset();
  const auto mode = r.u8();
  if (mode > 1) throw FormatError(source + ": unknown mode " + std::to_string(mode) + " at offset " + std::to_string(mode_at));
  FrameFeatures f;
  f.mode = static_cast<Mode>(mode);
  f.frames = r.u32();
  f.width = r.u32();
  if (f.frames == 0 || f.width == 0) r.fail("empty feature matrix");
  // Size check before allocating so a corrupt header cannot request gigabytes.
  auto body = r.bytes(f.frames * f.width * 4);
  f.values.resize(f.frames * f.width);
  std::memcpy(f.values.data(), body.data(), body.size());
  f.video_id = r.str();
  if (!r.at_end()) r.fail("trailing bytes");
  return f;
}

void write_features(const FrameFeatures& f, const std::string& path) { binio::write_file(path, serialize_features(f)); }

FrameFeatures read_features(const std::string& path) { return parse_features(binio::read_file(path), path); }

template nc::Tensor<float> encode_input(const vid::VideoEncoder<float>&, const EncoderInput&);
template nc::Tensor<double> encode_input(const vid::VideoEncoder<double>&, const EncoderInput&);

}  // namespace avsd::sampler
