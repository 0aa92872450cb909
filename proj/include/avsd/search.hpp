#pragma once

#include <functional>
#include <vector>

#include "avsd/fusiondec.hpp"
#include "json.hpp"

namespace avsd::search {

using text::TokenIds;

// A next-token distribution conditioned on a fixed dialog context.
class NextTokenModel {
 public:
  virtual ~NextTokenModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<double> distribution(const TokenIds& prefix) const = 0;
};

class DecoderModel : public NextTokenModel {
 public:
  DecoderModel(const dec::FusionDecoder<float>& model, const dec::DialogContext& ctx) : model_(model), ctx_(ctx) {}
  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::vector<double> distribution(const TokenIds& prefix) const override {
    return model_.next_token_distribution(ctx_, prefix);
  }

 private:
  const dec::FusionDecoder<float>& model_;
  const dec::DialogContext& ctx_;
};

// Any callable, mainly for tests and toy models.
class FunctionModel : public NextTokenModel {
 public:
  using Fn = std::function<std::vector<double>(const TokenIds&)>;
  FunctionModel(std::size_t vocab, Fn fn) : vocab_(vocab), fn_(std::move(fn)) {}
  std::size_t vocab_size() const override { return vocab_; }
  std::vector<double> distribution(const TokenIds& prefix) const override { return fn_(prefix); }

 private:
  std::size_t vocab_;
  Fn fn_;
};

// Arithmetic mean of member distributions.
class Ensemble : public NextTokenModel {
 public:
  explicit Ensemble(std::vector<const NextTokenModel*> members);  // ConfigError on empty or vocab mismatch
  std::size_t vocab_size() const override { return members_.front()->vocab_size(); }
  std::vector<double> distribution(const TokenIds& prefix) const override;

 private:
  std::vector<const NextTokenModel*> members_;
};

struct DecodeConfig {
  std::size_t beam = 5;
  std::size_t max_length = 20;
  double alpha = 0.3;
  text::TokenId eos = text::kEos;

  void validate() const;
  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

struct Hypothesis {
  TokenIds tokens;  // includes the final eos when finished by eos
  double cum_logprob = 0.0;
  bool finished = false;

  // cum_logprob / length^alpha, length counting the eos token.
  double score(double alpha) const;
};

struct DecodeResult {
  TokenIds tokens;  // response without eos
  double cum_logprob = 0.0;
  double score = 0.0;
  bool ended_with_eos = false;
};

// Prunes by raw cumulative log-probability; selects the finished hypothesis
// with the best length-normalised score. Ties go to the lexicographically
// smaller token sequence.
DecodeResult beam_search(const NextTokenModel& model, const DecodeConfig& cfg);

// Argmax per step, lowest id on ties.
DecodeResult greedy(const NextTokenModel& model, std::size_t max_length, text::TokenId eos = text::kEos);

}  // namespace avsd::search
