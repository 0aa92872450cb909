#include "avsd/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd::score {

namespace {

using NgramCounts = std::map<Tokens, int>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

void require_nonempty(const Corpus& c, const char* what) {
  if (c.empty()) throw InputError(std::string(what) + ": empty corpus");
  for (const auto& p : c) {
    if (p.references.empty()) throw InputError(std::string(what) + ": pair without references");
  }
}

}  // namespace

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(static_cast<char>(u < 0x80 ? std::tolower(u) : u));
    }
  }
  flush();
  return out;
}

double bleu(const Corpus& corpus, int n) {
  require_nonempty(corpus, "bleu");
  if (n < 1 || n > 4) throw InputError("bleu: order must be in 1..4");
  std::vector<double> matched(static_cast<std::size_t>(n), 0.0), total(static_cast<std::size_t>(n), 0.0);
  double c_len = 0.0, r_len = 0.0;
  for (const auto& p : corpus) {
    c_len += static_cast<double>(p.candidate.size());
    std::size_t best = p.references.front().size();
    for (const auto& r : p.references) {
      const auto d = [&](std::size_t len) { return len > p.candidate.size() ? len - p.candidate.size() : p.candidate.size() - len; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    r_len += static_cast<double>(best);
    for (int k = 1; k <= n; ++k) {
      const auto cand = ngrams(p.candidate, static_cast<std::size_t>(k));
      NgramCounts max_ref;
      for (const auto& r : p.references) {
        for (const auto& [g, cnt] : ngrams(r, static_cast<std::size_t>(k))) max_ref[g] = std::max(max_ref[g], cnt);
      }
      for (const auto& [g, cnt] : cand) {
        auto it = max_ref.find(g);
        matched[static_cast<std::size_t>(k - 1)] += std::min(cnt, it == max_ref.end() ? 0 : it->second);
        total[static_cast<std::size_t>(k - 1)] += cnt;
      }
    }
  }
  if (c_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double prec = total[static_cast<std::size_t>(k)] > 0 ? matched[static_cast<std::size_t>(k)] / total[static_cast<std::size_t>(k)] : 0.0;
    log_sum += std::log(std::max(prec, 1e-9));
  }
  const double bp = c_len < r_len ? std::exp(1.0 - r_len / c_len) : 1.0;
  return bp * std::exp(log_sum / n);
}

double rouge_l_pair(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<std::vector<int>> lcs(cand.size() + 1, std::vector<int>(ref.size() + 1, 0));
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      lcs[i][j] = cand[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1 : std::max(lcs[i - 1][j], lcs[i][j - 1]);
    }
  }
  const double l = lcs[cand.size()][ref.size()];
  if (l == 0) return 0.0;
  const double p = l / static_cast<double>(cand.size()), r = l / static_cast<double>(ref.size());
  const double b2 = 1.2 * 1.2;
  return (1 + b2) * p * r / (r + b2 * p);
}

double rouge_l(const Corpus& corpus) {
  require_nonempty(corpus, "rouge_l");
  double sum = 0.0;
  for (const auto& p : corpus) {
    double best = 0.0;
    for (const auto& r : p.references) best = std::max(best, rouge_l_pair(p.candidate, r));
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

double cider(const Corpus& corpus) {
  require_nonempty(corpus, "cider");
  constexpr double kSigma = 6.0;
  const double n_docs = static_cast<double>(corpus.size());
  // Document frequency: number of reference sets containing each n-gram.
  std::map<Tokens, double> df;
  for (const auto& p : corpus) {
    std::set<Tokens> seen;
    for (const auto& r : p.references) {
      for (std::size_t n = 1; n <= 4; ++n) {
        for (const auto& [g, cnt] : ngrams(r, n)) seen.insert(g);
      }
    }
    for (const auto& g : seen) df[g] += 1.0;
  }
  // Smoothed IDF so that a single-pair corpus still weighs its n-grams.
  auto idf = [&](const Tokens& g) {
    auto it = df.find(g);
    return std::log((n_docs + 1.0) / std::max(1.0, it == df.end() ? 0.0 : it->second));
  };
  struct Vec {
    std::map<Tokens, double> w;
    double norm = 0.0;
  };
  auto vectorize = [&](const Tokens& t, std::size_t n) {
    Vec v;
    for (const auto& [g, cnt] : ngrams(t, n)) {
      const double x = cnt * idf(g);
      v.w[g] = x;
      v.norm += x * x;
    }
    v.norm = std::sqrt(v.norm);
    return v;
  };

  double total = 0.0;
  for (const auto& p : corpus) {
    double pair_score = 0.0;
    for (const auto& r : p.references) {
      const double delta = static_cast<double>(p.candidate.size()) - static_cast<double>(r.size());
      const double gauss = std::exp(-(delta * delta) / (2 * kSigma * kSigma));
      double sum_n = 0.0;
      for (std::size_t n = 1; n <= 4; ++n) {
        const auto hv = vectorize(p.candidate, n), rv = vectorize(r, n);
        if (hv.norm == 0.0 || rv.norm == 0.0) continue;
        double dot = 0.0;
        for (const auto& [g, x] : hv.w) {
          auto it = rv.w.find(g);
          if (it != rv.w.end()) dot += std::min(x, it->second) * it->second;
        }
        sum_n += dot / (hv.norm * rv.norm) * gauss;
      }
      pair_score += sum_n / 4.0;
    }
    total += 10.0 * pair_score / static_cast<double>(p.references.size());
  }
  return total / n_docs;
}

double meteor_lite_pair(const Tokens& cand, const Tokens& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  std::vector<bool> used(ref.size(), false);
  std::vector<long> align(cand.size(), -1);
  std::size_t m = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        align[i] = static_cast<long>(j);
        ++m;
        break;
      }
    }
  }
  if (m == 0) return 0.0;
  // A chunk continues while both the candidate and reference positions advance by one.
  std::size_t chunks = 0;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (align[i] < 0) continue;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i] == align[i - 1] + 1;
    if (!continues) ++chunks;
  }
  const double p = static_cast<double>(m) / static_cast<double>(cand.size());
  const double r = static_cast<double>(m) / static_cast<double>(ref.size());
  const double f = 10 * p * r / (r + 9 * p);
  const double frag = static_cast<double>(chunks) / static_cast<double>(m);
  return f * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(const Corpus& corpus) {
  require_nonempty(corpus, "meteor_lite");
  double sum = 0.0;
  for (const auto& p : corpus) {
    double best = 0.0;
    for (const auto& r : p.references) best = std::max(best, meteor_lite_pair(p.candidate, r));
    sum += best;
  }
  return sum / static_cast<double>(corpus.size());
}

namespace {
double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::string fixed4(double x) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(4);
  s << x;
  return s.str();
}
}  // namespace

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  for (int n = 0; n < 4; ++n) j["BLEU-" + std::to_string(n + 1)] = round4(bleu[n]);
  j["METEOR-lite"] = round4(meteor);
  j["ROUGE-L"] = round4(rouge);
  j["CIDEr"] = round4(cider);
  j["pairs"] = pairs;
  if (!family_accuracy.empty()) {
    for (const auto& [k, v] : family_accuracy) j["accuracy"][k] = round4(v);
  }
  return j;
}

std::string MetricReport::to_text() const {
  std::ostringstream s;
  for (int n = 0; n < 4; ++n) s << "BLEU-" << n + 1 << ' ' << fixed4(bleu[n]) << '\n';
  s << "METEOR-lite " << fixed4(meteor) << '\n';
  s << "ROUGE-L " << fixed4(rouge) << '\n';
  s << "CIDEr " << fixed4(cider) << '\n';
  for (const auto& [k, v] : family_accuracy) s << "accuracy/" << k << ' ' << fixed4(v) << '\n';
  return s.str();
}

MetricReport evaluate(const Corpus& corpus) {
  MetricReport r;
  for (int n = 1; n <= 4; ++n) r.bleu[n - 1] = bleu(corpus, n);
  r.meteor = meteor_lite(corpus);
  r.rouge = rouge_l(corpus);
  r.cider = cider(corpus);
  r.pairs = corpus.size();
  return r;
}

MetricReport evaluate_maps(const std::map<std::string, std::string>& predictions,
                           const std::map<std::string, Reference>& references) {
  std::vector<std::string> missing, extra;
  for (const auto& [id, ref] : references) {
    if (!predictions.count(id)) missing.push_back(id);
  }
  for (const auto& [id, ans] : predictions) {
    if (!references.count(id)) extra.push_back(id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "evaluate: predictions and references are not aligned;";
    auto list = [&](const char* label, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg += std::string(" ") + label + ":";
      for (std::size_t i = 0; i < ids.size() && i < 20; ++i) msg += " " + ids[i];
      if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
    };
    list("missing predictions", missing);
    list("unknown ids", extra);
    throw InputError(msg);
  }
  Corpus corpus;
  std::map<std::string, std::pair<double, double>> fam;  // hits, total
  for (const auto& [id, ref] : references) {
    EvalPair p;
    p.candidate = tokenize(predictions.at(id));
    bool hit = false;
    for (const auto& a : ref.answers) {
      p.references.push_back(tokenize(a));
      hit = hit || p.references.back() == p.candidate;
    }
    if (!ref.family.empty()) {
      fam[ref.family].first += hit ? 1.0 : 0.0;
      fam[ref.family].second += 1.0;
    }
    corpus.push_back(std::move(p));
  }
  auto report = evaluate(corpus);
  for (const auto& [k, v] : fam) report.family_accuracy[k] = v.first / v.second;
  return report;
}

namespace {

template <typename F>
void for_each_json_line(const std::string& path, F&& fn) {
  std::istringstream in(binio::read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      fn(j);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

MetricReport evaluate_run(const std::string& predictions_path, const std::string& references_path) {
  std::map<std::string, std::string> preds;
  for_each_json_line(predictions_path, [&](const nlohmann::json& j) {
    preds[j.at("id").get<std::string>()] = j.at("answer").get<std::string>();
  });
  std::map<std::string, Reference> refs;
  for_each_json_line(references_path, [&](const nlohmann::json& j) {
    Reference r;
    r.answers = j.at("answers").get<std::vector<std::string>>();
    if (r.answers.empty()) throw FormatError(references_path + ": id " + j.at("id").get<std::string>() + " has no answers");
    r.family = j.value("family", "");
    refs[j.at("id").get<std::string>()] = std::move(r);
  });
  return evaluate_maps(preds, refs);
}

}  // namespace avsd::score
