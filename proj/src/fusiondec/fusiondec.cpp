#include "avsd/fusiondec.hpp"

#include <cmath>

#include "avsd/error.hpp"

namespace avsd::dec {

void DecoderConfig::validate() const {
  if (blocks == 0 || width == 0 || heads == 0 || ffn_width == 0 || max_positions == 0 || feature_width == 0) {
    throw ConfigError("decoder: blocks, width, heads, ffn_width, max_positions and feature_width must be positive");
  }
  if (width % heads != 0) {
    throw ConfigError("decoder: width " + std::to_string(width) + " is not divisible by heads " + std::to_string(heads));
  }
  if (vocab_size == 0) throw ConfigError("decoder: vocab_size must be positive");
  for (auto id : {video_segment, question_segment, answer_segment, eos}) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw ConfigError("decoder: special id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab_size));
    }
  }
}

nlohmann::json DecoderConfig::to_json() const {
  return {{"blocks", blocks},
          {"width", width},
          {"heads", heads},
          {"ffn_width", ffn_width},
          {"max_positions", max_positions},
          {"feature_width", feature_width},
          {"vocab_size", vocab_size},
          {"segment_ids", {video_segment, question_segment, answer_segment}},
          {"eos", eos}};
}

DecoderConfig DecoderConfig::from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.blocks = j.at("blocks").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_width = j.at("ffn_width").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.feature_width = j.at("feature_width").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  const auto seg = j.at("segment_ids").get<std::vector<text::TokenId>>();
  if (seg.size() != 3) throw ConfigError("decoder: segment_ids needs three entries");
  c.video_segment = seg[0];
  c.question_segment = seg[1];
  c.answer_segment = seg[2];
  c.eos = j.at("eos").get<text::TokenId>();
  c.validate();
  return c;
}

DecoderConfig DecoderConfig::full_scale(std::size_t vocab_size, std::size_t feature_width) {
  DecoderConfig c;
  c.blocks = 12;
  c.width = 768;
  c.heads = 12;
  c.ffn_width = 3072;
  c.max_positions = 1024;
  c.feature_width = feature_width;
  c.vocab_size = vocab_size;
  return c;
}

std::size_t DialogContext::history_length() const {
  std::size_t n = 0;
  for (const auto& t : history) n += t.question.size() + t.answer.size();
  return n;
}

namespace {

std::string block_name(std::size_t l, const char* part) { return "dec.blk" + std::to_string(l) + "." + part; }

void append(text::TokenIds& tokens, text::TokenIds& segments, const text::TokenIds& part, text::TokenId segment) {
  for (auto id : part) {
    tokens.push_back(id == kIgnore ? text::kPad : id);
    segments.push_back(segment);
  }
}

}  // namespace

template <typename T>
FusionDecoder<T>::FusionDecoder(DecoderConfig cfg, ParamStore<T> params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
}

template <typename T>
FusionDecoder<T> FusionDecoder<T>::init(const DecoderConfig& cfg, Rng& rng) {
  cfg.validate();
  ParamStore<T> p;
  const std::size_t d = cfg.width;
  auto dense = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    p.add_normal(prefix + ".w", {in, out}, 0.02, rng);
    p.add_constant(prefix + ".b", {out}, T(0));
  };
  auto norm = [&](const std::string& prefix) {
    p.add_constant(prefix + ".g", {d}, T(1));
    p.add_constant(prefix + ".b", {d}, T(0));
  };
  dense("dec.video", cfg.feature_width, d);
  p.add_normal("dec.tok", {cfg.vocab_size, d}, 0.02, rng);
  p.add_normal("dec.pos", {cfg.max_positions, d}, 0.02, rng);
  for (std::size_t l = 0; l < cfg.blocks; ++l) {
    norm(block_name(l, "ln1"));
    dense(block_name(l, "attn_qkv"), d, 3 * d);
    dense(block_name(l, "attn_out"), d, d);
    norm(block_name(l, "ln2"));
    dense(block_name(l, "ffn1"), d, cfg.ffn_width);
    dense(block_name(l, "ffn2"), cfg.ffn_width, d);
  }
  norm("dec.lnf");
  return FusionDecoder(cfg, std::move(p));
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::linear(const nc::Tensor<T>& x, const std::string& prefix) const {
  return nc::linear(x, params_.get(prefix + ".w"), params_.get(prefix + ".b"));
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::norm(const nc::Tensor<T>& x, const std::string& prefix) const {
  return nc::layer_norm(x, params_.get(prefix + ".g"), params_.get(prefix + ".b"));
}

template <typename T>
FusedLayout FusionDecoder<T>::layout(const DialogContext& ctx, const text::TokenIds& response_prefix) const {
  FusedLayout out;
  out.video_rows = ctx.video.frames;
  out.segments.assign(ctx.video.frames, cfg_.video_segment);
  for (const auto& turn : ctx.history) {
    append(out.tokens, out.segments, turn.question, cfg_.question_segment);
    append(out.tokens, out.segments, turn.answer, cfg_.answer_segment);
  }
  append(out.tokens, out.segments, ctx.question, cfg_.question_segment);
  append(out.tokens, out.segments, response_prefix, cfg_.answer_segment);
  return out;
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::build_input(const DialogContext& ctx, const text::TokenIds& response_prefix) const {
  const auto& v = ctx.video;
  if (v.values.size() != v.frames * v.width) {
    throw DimensionError("decoder: " + std::to_string(v.values.size()) + " feature values do not fill " +
                         std::to_string(v.frames) + "x" + std::to_string(v.width));
  }
  nc::Tensor<T> features({v.frames, v.width}, std::vector<T>(v.values.begin(), v.values.end()));
  return build_input(ctx, response_prefix, features);
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::build_input(const DialogContext& ctx, const text::TokenIds& response_prefix,
                                            const nc::Tensor<T>& video) const {
  if (ctx.video.frames == 0) throw InputError("decoder: video has no feature rows");
  if (video.rank() != 2 || video.dim(0) != ctx.video.frames || video.dim(1) != cfg_.feature_width) {
    throw DimensionError("decoder: video features are " + nc::shape_str(video.shape()) + ", expected " +
                         std::to_string(ctx.video.frames) + "x" + std::to_string(cfg_.feature_width));
  }
  const auto lay = layout(ctx, response_prefix);
  if (lay.length() > cfg_.max_positions) {
    throw RangeError("decoder: fused length " + std::to_string(lay.length()) + " exceeds max_positions " +
                     std::to_string(cfg_.max_positions));
  }
  const auto& tok = params_.get("dec.tok");
  auto feat = linear(video, "dec.video");
  if (!lay.tokens.empty()) feat = nc::concat<T>({feat, nc::embedding(tok, lay.tokens)}, 0);
  auto pos = nc::slice(params_.get("dec.pos"), 0, 0, lay.length());
  return nc::add(nc::add(feat, pos), nc::embedding(tok, lay.segments));
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::block(const nc::Tensor<T>& state, std::size_t l) const {
  auto pattern = std::make_shared<const nc::AttentionPattern>(nc::AttentionPattern::causal(state.dim(0)));
  auto qkv = linear(norm(state, block_name(l, "ln1")), block_name(l, "attn_qkv"));
  auto x = nc::add(state, linear(nc::attention(qkv, cfg_.heads, pattern), block_name(l, "attn_out")));
  auto h = nc::gelu(linear(norm(x, block_name(l, "ln2")), block_name(l, "ffn1")));
  return nc::add(x, linear(h, block_name(l, "ffn2")));
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::hidden(const DialogContext& ctx, const text::TokenIds& response_prefix) const {
  auto state = build_input(ctx, response_prefix);
  for (std::size_t l = 0; l < cfg_.blocks; ++l) state = block(state, l);
  return state;
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::hidden(const DialogContext& ctx, const text::TokenIds& response_prefix,
                                       const nc::Tensor<T>& video) const {
  auto state = build_input(ctx, response_prefix, video);
  for (std::size_t l = 0; l < cfg_.blocks; ++l) state = block(state, l);
  return state;
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::logits(const nc::Tensor<T>& hidden, std::size_t first_row, std::size_t rows) const {
  auto x = norm(nc::slice(hidden, 0, first_row, rows), "dec.lnf");
  return nc::matmul(x, nc::transpose(params_.get("dec.tok")));
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::response_logits(const DialogContext& ctx, const text::TokenIds& response) const {
  if (response.empty()) throw InputError("decoder: empty response");
  const text::TokenIds consumed(response.begin(), response.end() - 1);
  // Row offset-1 (the last context token) predicts the first response token.
  return logits(hidden(ctx, consumed), ctx.response_offset() - 1, response.size());
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::response_logits(const DialogContext& ctx, const text::TokenIds& response,
                                                const nc::Tensor<T>& video) const {
  if (response.empty()) throw InputError("decoder: empty response");
  const text::TokenIds consumed(response.begin(), response.end() - 1);
  return logits(hidden(ctx, consumed, video), ctx.response_offset() - 1, response.size());
}

template <typename T>
std::vector<double> FusionDecoder<T>::next_token_distribution(const DialogContext& ctx,
                                                              const text::TokenIds& prefix) const {
  nc::NoGradGuard no_grad;
  auto z = logits(hidden(ctx, prefix), ctx.response_offset() - 1 + prefix.size(), 1);
  const auto& row = z.data();
  double top = -INFINITY;
  for (auto v : row) top = std::max(top, static_cast<double>(v));
  std::vector<double> p(row.size());
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) total += p[i] = std::exp(static_cast<double>(row[i]) - top);
  for (auto& x : p) x /= total;
  return p;
}

template <typename T>
nc::Tensor<T> FusionDecoder<T>::sequence_nll(const DialogContext& ctx, const text::TokenIds& response) const {
  return nc::cross_entropy(response_logits(ctx, response), response, kIgnore);
}

template <typename T>
nlohmann::json FusionDecoder<T>::checkpoint_config() const {
  return {{"kind", "decoder"}, {"config", cfg_.to_json()}};
}

template <typename T>
nc::Tensor<T> batch_nll(const FusionDecoder<T>& model, const std::vector<Example>& batch) {
  if (batch.empty()) throw InputError("batch_nll: empty batch");
  std::vector<nc::Tensor<T>> parts;
  text::TokenIds targets;
  for (const auto& ex : batch) {
    parts.push_back(model.response_logits(*ex.context, ex.response));
    targets.insert(targets.end(), ex.response.begin(), ex.response.end());
  }
  auto all = parts.size() == 1 ? parts[0] : nc::concat(parts, 0);
  return nc::cross_entropy(all, targets, kIgnore);
}

FusionDecoder<float> load_decoder(const Checkpoint& ck) {
  if (ck.config.value("kind", "") != "decoder") throw FormatError("checkpoint is not a decoder");
  auto cfg = DecoderConfig::from_json(ck.config.at("config"));
  Rng rng(0);
  auto model = FusionDecoder<float>::init(cfg, rng);
  import_params(model.params(), ck.tensors);
  return model;
}

Checkpoint save_decoder(const FusionDecoder<float>& model, const nlohmann::json& extra) {
  Checkpoint ck;
  ck.config = model.checkpoint_config();
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) ck.config[it.key()] = it.value();
  }
  ck.tensors = export_params(model.params());
  return ck;
}

template class FusionDecoder<float>;
template class FusionDecoder<double>;
template nc::Tensor<float> batch_nll(const FusionDecoder<float>&, const std::vector<Example>&);
template nc::Tensor<double> batch_nll(const FusionDecoder<double>&, const std::vector<Example>&);

}  // namespace avsd::dec
