#include "avsd/search.hpp"

#include <algorithm>
#include <cmath>

#include "avsd/error.hpp"

namespace avsd::search {

Ensemble::Ensemble(std::vector<const NextTokenModel*> members) : members_(std::move(members)) {
  if (members_.empty()) throw ConfigError("ensemble: no models");
  for (const auto* m : members_) {
    if (m->vocab_size() != members_.front()->vocab_size()) {
      throw ConfigError("ensemble: vocabulary sizes differ (" + std::to_string(m->vocab_size()) + " vs " +
                        std::to_string(members_.front()->vocab_size()) + ")");
    }
  }
}

std::vector<double> Ensemble::distribution(const TokenIds& prefix) const {
  if (members_.size() == 1) return members_.front()->distribution(prefix);
  // Extended-precision sum: k copies of the same p add up exactly, so the
  // mean is p again and duplicated checkpoints cannot change a decode.
  std::vector<long double> sum(vocab_size(), 0.0L);
  for (const auto* m : members_) {
    const auto p = m->distribution(prefix);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p[i];
  }
  std::vector<double> mean(sum.size());
  const auto k = static_cast<long double>(members_.size());
  for (std::size_t i = 0; i < sum.size(); ++i) mean[i] = static_cast<double>(sum[i] / k);
  return mean;
}

void DecodeConfig::validate() const {
  if (beam == 0) throw ConfigError("decode: beam must be at least 1");
  if (max_length == 0) throw ConfigError("decode: max_length must be at least 1");
  if (!(alpha >= 0.0)) throw ConfigError("decode: alpha must be non-negative");
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"beam", beam}, {"max_length", max_length}, {"alpha", alpha}};
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j) {
  DecodeConfig c;
  c.beam = j.at("beam").get<std::size_t>();
  c.max_length = j.at("max_length").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.validate();
  return c;
}

double Hypothesis::score(double alpha) const {
  return cum_logprob / std::pow(static_cast<double>(tokens.size()), alpha);
}

namespace {

DecodeResult finish(const Hypothesis& h, double alpha, text::TokenId eos) {
  DecodeResult r;
  r.ended_with_eos = !h.tokens.empty() && h.tokens.back() == eos;
  r.tokens = h.tokens;
  if (r.ended_with_eos) r.tokens.pop_back();
  r.cum_logprob = h.cum_logprob;
  r.score = h.score(alpha);
  return r;
}

}  // namespace

DecodeResult beam_search(const NextTokenModel& model, const DecodeConfig& cfg) {
  cfg.validate();
  const std::size_t vocab = model.vocab_size();
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  auto better = [](const Hypothesis& a, const Hypothesis& b) {
    if (a.cum_logprob != b.cum_logprob) return a.cum_logprob > b.cum_logprob;
    return a.tokens < b.tokens;
  };

  while (!live.empty() && finished.size() < cfg.beam) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * vocab);
    for (const auto& h : live) {
      const auto p = model.distribution(h.tokens);
      for (std::size_t v = 0; v < vocab; ++v) {
        Hypothesis c;
        c.tokens = h.tokens;
        c.tokens.push_back(static_cast<text::TokenId>(v));
        c.cum_logprob = h.cum_logprob + std::log(p[v]);
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(cfg.beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(), better);
    candidates.resize(keep);
    live.clear();
    for (auto& c : candidates) {
      c.finished = c.tokens.back() == cfg.eos || c.tokens.size() >= cfg.max_length;
      (c.finished ? finished : live).push_back(std::move(c));
    }
  }

  const Hypothesis* best = nullptr;
  for (const auto& h : finished) {
    if (!best) {
      best = &h;
      continue;
    }
    const double s = h.score(cfg.alpha), bs = best->score(cfg.alpha);
    if (s > bs || (s == bs && h.tokens < best->tokens)) best = &h;
  }
  return finish(*best, cfg.alpha, cfg.eos);
}

DecodeResult greedy(const NextTokenModel& model, std::size_t max_length, text::TokenId eos) {
  if (max_length == 0) throw ConfigError("greedy: max_length must be at least 1");
  Hypothesis h;
  while (true) {
    const auto p = model.distribution(h.tokens);
    std::size_t arg = 0;
    for (std::size_t v = 1; v < p.size(); ++v) {
      if (p[v] > p[arg]) arg = v;
    }
    h.tokens.push_back(static_cast<text::TokenId>(arg));
    h.cum_logprob += std::log(p[arg]);
    if (static_cast<text::TokenId>(arg) == eos || h.tokens.size() >= max_length) break;
  }
  h.finished = true;
  return finish(h, 0.0, eos);
}

}  // namespace avsd::search
