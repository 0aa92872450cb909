#pragma once

#include <cstddef>
#include <vector>

#include "avsd/ops.hpp"
#include "avsd/params.hpp"
#include "avsd/rng.hpp"
#include "avsd/sampler.hpp"
#include "avsd/textpiece.hpp"
#include "json.hpp"

namespace avsd::dec {

inline constexpr text::TokenId kIgnore = -100;

struct DecoderConfig {
  std::size_t blocks = 2;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t ffn_width = 256;
  std::size_t max_positions = 256;
  std::size_t feature_width = 64;  // video feature width
  std::size_t vocab_size = 0;
  // Token ids reused as segment markers, and the id that ends a response.
  text::TokenId video_segment = text::kVideo;
  text::TokenId question_segment = text::kQuestion;
  text::TokenId answer_segment = text::kAnswer;
  text::TokenId eos = text::kEos;

  void validate() const;
  nlohmann::json to_json() const;
  static DecoderConfig from_json(const nlohmann::json& j);

  // 12 blocks, width 768, 12 heads.
  static DecoderConfig full_scale(std::size_t vocab_size, std::size_t feature_width);
};

struct Turn {
  text::TokenIds question;
  text::TokenIds answer;
};

// Everything the decoder conditions on before the response.
struct DialogContext {
  sampler::FrameFeatures video;
  std::vector<Turn> history;  // oldest first
  text::TokenIds question;

  std::size_t history_length() const;
  // Offset of the first response token in the fused sequence.
  std::size_t response_offset() const { return video.frames + history_length() + question.size(); }
};

// Token and segment id of each fused position; video rows carry kIgnore as token.
struct FusedLayout {
  std::size_t video_rows = 0;
  text::TokenIds tokens;    // text positions only, in order
  text::TokenIds segments;  // every position
  std::size_t length() const { return segments.size(); }
};

template <typename T>
class FusionDecoder {
 public:
  FusionDecoder(DecoderConfig cfg, ParamStore<T> params);
  // GPT-2 style: N(0, 0.02) weights and tables, zero biases, unit norms.
  static FusionDecoder init(const DecoderConfig& cfg, Rng& rng);

  const DecoderConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // Layout of [video; history; question; response_prefix].
  FusedLayout layout(const DialogContext& ctx, const text::TokenIds& response_prefix) const;

  // Level-0 sequence: feature + position + segment embeddings.
  nc::Tensor<T> build_input(const DialogContext& ctx, const text::TokenIds& response_prefix) const;
  // Same, with the video rows supplied as a tensor (e.g. a live encoder output).
  // Its row count must equal ctx.video.frames.
  nc::Tensor<T> build_input(const DialogContext& ctx, const text::TokenIds& response_prefix,
                            const nc::Tensor<T>& video) const;
  nc::Tensor<T> block(const nc::Tensor<T>& state, std::size_t l) const;
  // Output of the last block (before the final norm).
  nc::Tensor<T> hidden(const DialogContext& ctx, const text::TokenIds& response_prefix) const;
  nc::Tensor<T> hidden(const DialogContext& ctx, const text::TokenIds& response_prefix,
                       const nc::Tensor<T>& video) const;
  // Vocabulary logits of the given rows of a hidden sequence.
  nc::Tensor<T> logits(const nc::Tensor<T>& hidden, std::size_t first_row, std::size_t rows) const;

  // Teacher-forced logits predicting every token of `response` ([J x vocab]).
  nc::Tensor<T> response_logits(const DialogContext& ctx, const text::TokenIds& response) const;
  nc::Tensor<T> response_logits(const DialogContext& ctx, const text::TokenIds& response,
                                const nc::Tensor<T>& video) const;

  // P(next token | context, prefix), read from the last consumed position.
  std::vector<double> next_token_distribution(const DialogContext& ctx, const text::TokenIds& prefix) const;

  // Mean cross-entropy over response tokens; kIgnore targets are skipped.
  nc::Tensor<T> sequence_nll(const DialogContext& ctx, const text::TokenIds& response) const;

  nlohmann::json checkpoint_config() const;

 private:
  nc::Tensor<T> linear(const nc::Tensor<T>& x, const std::string& prefix) const;
  nc::Tensor<T> norm(const nc::Tensor<T>& x, const std::string& prefix) const;

  DecoderConfig cfg_;
  ParamStore<T> params_;
};

// One (context, response) pair of a training batch.
struct Example {
  const DialogContext* context = nullptr;
  text::TokenIds response;
};

// Mean cross-entropy over all response tokens of the batch. Equivalent to a
// padded, masked batch since every example has its own causal sequence.
template <typename T>
nc::Tensor<T> batch_nll(const FusionDecoder<T>& model, const std::vector<Example>& batch);

FusionDecoder<float> load_decoder(const Checkpoint& ck);
Checkpoint save_decoder(const FusionDecoder<float>& model, const nlohmann::json& extra = {});

extern template class FusionDecoder<float>;
extern template class FusionDecoder<double>;

}  // namespace avsd::dec
