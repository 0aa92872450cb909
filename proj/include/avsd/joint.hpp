#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "avsd/fusiondec.hpp"
#include "avsd/sampler.hpp"
#include "avsd/vidformer.hpp"

namespace avsd::dec {

// Encoder and decoder trained together: pooled frame features come from the
// live encoder instead of a feature file.
template <typename T>
class VideoDialogModel {
 public:
  VideoDialogModel(vid::VideoEncoder<T> encoder, FusionDecoder<T> decoder, sampler::Mode mode,
                   std::size_t segment_frames);

  const vid::VideoEncoder<T>& encoder() const { return encoder_; }
  const FusionDecoder<T>& decoder() const { return decoder_; }
  sampler::Mode mode() const { return mode_; }
  std::size_t segment_frames() const { return segment_frames_; }

  // Encoder parameters followed by decoder parameters, aliasing both.
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  sampler::EncoderInput prepare(const sampler::RawVideo& video) const;
  nc::Tensor<T> video_rows(const sampler::EncoderInput& input) const;
  nc::Tensor<T> response_logits(const sampler::EncoderInput& input, const DialogContext& ctx,
                                const text::TokenIds& response) const;

 private:
  vid::VideoEncoder<T> encoder_;
  FusionDecoder<T> decoder_;
  sampler::Mode mode_;
  std::size_t segment_frames_;
  ParamStore<T> params_;
};

struct JointExample {
  const sampler::EncoderInput* input = nullptr;
  const DialogContext* context = nullptr;  // its video field only supplies the row count
  text::TokenIds response;
};

// Token-weighted mean NLL; examples sharing an input share one encoder pass.
template <typename T>
nc::Tensor<T> joint_batch_nll(const VideoDialogModel<T>& model, const std::vector<JointExample>& batch);

// Checkpoint kind "joint": both configs plus the sampling mode.
Checkpoint save_joint(const VideoDialogModel<float>& model, const nlohmann::json& extra = {});
VideoDialogModel<float> load_joint(const Checkpoint& ck);

extern template class VideoDialogModel<float>;
extern template class VideoDialogModel<double>;

}  // namespace avsd::dec
