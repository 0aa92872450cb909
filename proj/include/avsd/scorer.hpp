#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace avsd::score {

using Tokens = std::vector<std::string>;

// Lowercase, whitespace split, ASCII punctuation as separate tokens.
Tokens tokenize(const std::string& text);

struct EvalPair {
  Tokens candidate;
  std::vector<Tokens> references;  // at least one
};

using Corpus = std::vector<EvalPair>;

// Corpus BLEU-n with clipped counts, closest reference length (ties to the
// shorter) and each precision floored at 1e-9.
double bleu(const Corpus& corpus, int n);
double rouge_l(const Corpus& corpus);  // F with beta 1.2, max over references
double cider(const Corpus& corpus);    // CIDEr-D, sigma 6, scaled by 10
// Exact-match unigram alignment only; no stemming or synonyms.
double meteor_lite(const Corpus& corpus);

// Per-pair pieces, exposed for tests.
double rouge_l_pair(const Tokens& cand, const Tokens& ref);
double meteor_lite_pair(const Tokens& cand, const Tokens& ref);

struct MetricReport {
  double bleu[4] = {0, 0, 0, 0};
  double meteor = 0.0;
  double rouge = 0.0;
  double cider = 0.0;
  std::size_t pairs = 0;
  // Exact-match accuracy per question family, when the references carry one.
  std::map<std::string, double> family_accuracy;

  // Values rounded to 4 decimals here and only here.
  nlohmann::json to_json() const;
  std::string to_text() const;
};

MetricReport evaluate(const Corpus& corpus);

struct Reference {
  std::vector<std::string> answers;
  std::string family;
};

// Reads {"id","answer"} predictions and {"id","answers"[,"family"]} references.
// Every reference id needs a prediction and vice versa.
MetricReport evaluate_run(const std::string& predictions_path, const std::string& references_path);
MetricReport evaluate_maps(const std::map<std::string, std::string>& predictions,
                           const std::map<std::string, Reference>& references);

}  // namespace avsd::score
