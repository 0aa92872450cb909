#include "avsd/joint.hpp"

#include "avsd/error.hpp"

namespace avsd::dec {

template <typename T>
VideoDialogModel<T>::VideoDialogModel(vid::VideoEncoder<T> encoder, FusionDecoder<T> decoder, sampler::Mode mode,
                                      std::size_t segment_frames)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), mode_(mode), segment_frames_(segment_frames) {
  if (encoder_.config().width != decoder_.config().feature_width) {
    throw ConfigError("joint model: encoder width " + std::to_string(encoder_.config().width) +
                      " != decoder feature width " + std::to_string(decoder_.config().feature_width));
  }
  for (const auto& [name, t] : encoder_.params().entries()) params_.alias(name, t);
  for (const auto& [name, t] : decoder_.params().entries()) params_.alias(name, t);
}

template <typename T>
sampler::EncoderInput VideoDialogModel<T>::prepare(const sampler::RawVideo& video) const {
  return sampler::prepare_input(video, mode_, encoder_.config(), segment_frames_);
}

template <typename T>
nc::Tensor<T> VideoDialogModel<T>::video_rows(const sampler::EncoderInput& input) const {
  return sampler::encode_input(encoder_, input);
}

template <typename T>
nc::Tensor<T> VideoDialogModel<T>::response_logits(const sampler::EncoderInput& input, const DialogContext& ctx,
                                                   const text::TokenIds& response) const {
  return decoder_.response_logits(ctx, response, video_rows(input));
}

template <typename T>
nc::Tensor<T> joint_batch_nll(const VideoDialogModel<T>& model, const std::vector<JointExample>& batch) {
  if (batch.empty()) throw InputError("joint_batch_nll: empty batch");
  std::map<const sampler::EncoderInput*, nc::Tensor<T>> rows;
  std::vector<nc::Tensor<T>> parts;
  text::TokenIds targets;
  for (const auto& ex : batch) {
    auto it = rows.find(ex.input);
    if (it == rows.end()) it = rows.emplace(ex.input, model.video_rows(*ex.input)).first;
    parts.push_back(model.decoder().response_logits(*ex.context, ex.response, it->second));
    targets.insert(targets.end(), ex.response.begin(), ex.response.end());
  }
  auto all = parts.size() == 1 ? parts[0] : nc::concat(parts, 0);
  return nc::cross_entropy(all, targets, kIgnore);
}

Checkpoint save_joint(const VideoDialogModel<float>& model, const nlohmann::json& extra) {
  Checkpoint ck;
  ck.config = {{"kind", "joint"},
               {"encoder", model.encoder().config().to_json()},
               {"decoder", model.decoder().config().to_json()},
               {"mode", sampler::mode_name(model.mode())},
               {"segment_frames", model.segment_frames()}};
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) ck.config[it.key()] = it.value();
  }
  ck.tensors = export_params(model.params());
  return ck;
}

VideoDialogModel<float> load_joint(const Checkpoint& ck) {
  if (ck.config.value("kind", "") != "joint") throw FormatError("checkpoint is not a joint model");
  Rng rng(0);
  auto enc = vid::VideoEncoder<float>::init(vid::EncoderConfig::from_json(ck.config.at("encoder")), rng);
  auto dec = FusionDecoder<float>::init(DecoderConfig::from_json(ck.config.at("decoder")), rng);
  VideoDialogModel<float> model(std::move(enc), std::move(dec),
                                sampler::parse_mode(ck.config.at("mode").get<std::string>()),
                                ck.config.at("segment_frames").get<std::size_t>());
  import_params(model.params(), ck.tensors);
  return model;
}

template class VideoDialogModel<float>;
template class VideoDialogModel<double>;
template nc::Tensor<float> joint_batch_nll(const VideoDialogModel<float>&, const std::vector<JointExample>&);
template nc::Tensor<double> joint_batch_nll(const VideoDialogModel<double>&, const std::vector<JointExample>&);

}  // namespace avsd::dec
