#pragma once

// Naive metric implementations for cross-checking the scorer: vectors and
// linear scans only, no shared code with the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "avsd/rng.hpp"
#include "avsd/scorer.hpp"

namespace avsd::testing {

using score::Corpus;
using score::EvalPair;
using score::Tokens;

using Gram = std::vector<std::string>;

inline int count_in(const Tokens& t, const Gram& g) {
  int c = 0;
  for (std::size_t i = 0; i + g.size() <= t.size(); ++i) {
    bool eq = true;
    for (std::size_t k = 0; k < g.size(); ++k) eq = eq && t[i + k] == g[k];
    c += eq ? 1 : 0;
  }
  return c;
}

inline std::vector<Gram> distinct_grams(const Tokens& t, std::size_t n) {
  std::vector<Gram> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    Gram g(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n));
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

inline double naive_bleu(const Corpus& c, int n) {
  double clen = 0, rlen = 0;
  std::vector<double> num(5, 0), den(5, 0);
  for (const auto& p : c) {
    clen += static_cast<double>(p.candidate.size());
    double best = -1, bestd = 1e18;
    for (const auto& r : p.references) {
      const double d = std::abs(static_cast<double>(r.size()) - static_cast<double>(p.candidate.size()));
      if (d < bestd || (d == bestd && static_cast<double>(r.size()) < best)) {
        bestd = d;
        best = static_cast<double>(r.size());
      }
    }
    rlen += best;
    for (int k = 1; k <= n; ++k) {
      for (const auto& g : distinct_grams(p.candidate, static_cast<std::size_t>(k))) {
        int mx = 0;
        for (const auto& r : p.references) mx = std::max(mx, count_in(r, g));
        num[static_cast<std::size_t>(k)] += std::min(count_in(p.candidate, g), mx);
        den[static_cast<std::size_t>(k)] += count_in(p.candidate, g);
      }
    }
  }
  if (clen == 0) return 0;
  double lg = 0;
  for (int k = 1; k <= n; ++k) {
    double pk = den[static_cast<std::size_t>(k)] == 0 ? 0 : num[static_cast<std::size_t>(k)] / den[static_cast<std::size_t>(k)];
    if (pk < 1e-9) pk = 1e-9;
    lg += std::log(pk);
  }
  return (clen < rlen ? std::exp(1 - rlen / clen) : 1.0) * std::exp(lg / n);
}

inline int naive_lcs(const Tokens& a, std::size_t i, const Tokens& b, std::size_t j, std::map<std::pair<std::size_t, std::size_t>, int>& memo) {
  if (i == a.size() || j == b.size()) return 0;
  auto key = std::make_pair(i, j);
  if (auto it = memo.find(key); it != memo.end()) return it->second;
  int v = a[i] == b[j] ? 1 + naive_lcs(a, i + 1, b, j + 1, memo)
                       : std::max(naive_lcs(a, i + 1, b, j, memo), naive_lcs(a, i, b, j + 1, memo));
  return memo[key] = v;
}

inline double naive_rouge(const Corpus& c) {
  double s = 0;
  for (const auto& p : c) {
    double best = 0;
    for (const auto& r : p.references) {
      std::map<std::pair<std::size_t, std::size_t>, int> memo;
      const double l = naive_lcs(p.candidate, 0, r, 0, memo);
      if (l == 0) continue;
      const double P = l / static_cast<double>(p.candidate.size()), R = l / static_cast<double>(r.size());
      best = std::max(best, (1 + 1.44) * P * R / (R + 1.44 * P));
    }
    s += best;
  }
  return s / static_cast<double>(c.size());
}

inline double naive_meteor_pair(const Tokens& c, const Tokens& r) {
  // Alignment: candidate word i takes the leftmost unused equal reference word.
  std::vector<int> a(c.size(), -1);
  std::vector<int> taken(r.size(), 0);
  int m = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!taken[j] && r[j] == c[i]) {
        taken[j] = 1;
        a[i] = static_cast<int>(j);
        ++m;
        break;
      }
    }
  }
  if (m == 0) return 0;
  // Chunks = matches minus adjacent pairs that continue a run.
  int joins = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (a[i] >= 0 && a[i - 1] >= 0 && a[i] - a[i - 1] == 1) ++joins;
  }
  const double ch = m - joins;
  const double P = static_cast<double>(m) / static_cast<double>(c.size()), R = static_cast<double>(m) / static_cast<double>(r.size());
  const double F = P * R / (0.1 * R + 0.9 * P);
  return F * (1 - 0.5 * std::pow(ch / m, 3));
}

inline double naive_meteor(const Corpus& c) {
  double s = 0;
  for (const auto& p : c) {
    double best = 0;
    for (const auto& r : p.references) best = std::max(best, naive_meteor_pair(p.candidate, r));
    s += best;
  }
  return s / static_cast<double>(c.size());
}

inline double naive_cider(const Corpus& c) {
  const double N = static_cast<double>(c.size());
  auto df = [&](const Gram& g) {
    double d = 0;
    for (const auto& p : c) {
      bool any = false;
      for (const auto& r : p.references) any = any || count_in(r, g) > 0;
      d += any ? 1 : 0;
    }
    return std::max(d, 1.0);
  };
  double total = 0;
  for (const auto& p : c) {
    double acc = 0;
    for (const auto& r : p.references) {
      double per_n = 0;
      for (std::size_t n = 1; n <= 4; ++n) {
        double dot = 0, nh = 0, nr = 0;
        for (const auto& g : distinct_grams(p.candidate, n)) {
          const double w = std::log((N + 1) / df(g));
          const double h = count_in(p.candidate, g) * w, q = count_in(r, g) * w;
          nh += h * h;
          dot += std::min(h, q) * q;
        }
        for (const auto& g : distinct_grams(r, n)) {
          const double q = count_in(r, g) * std::log((N + 1) / df(g));
          nr += q * q;
        }
        if (nh == 0 || nr == 0) continue;
        const double dl = static_cast<double>(p.candidate.size()) - static_cast<double>(r.size());
        per_n += dot / (std::sqrt(nh) * std::sqrt(nr)) * std::exp(-dl * dl / 72.0);
      }
      acc += per_n / 4;
    }
    total += 10 * acc / static_cast<double>(p.references.size());
  }
  return total / N;
}

inline Corpus random_corpus(Rng& rng, std::size_t pairs) {
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  auto sentence = [&](int lo) {
    Tokens t;
    const int len = rng.range(lo, 8);
    for (int i = 0; i < len; ++i) t.push_back(words[rng.below(words.size())]);
    return t;
  };
  Corpus c;
  for (std::size_t i = 0; i < pairs; ++i) {
    EvalPair p;
    p.candidate = sentence(0);
    const int refs = rng.range(1, 3);
    for (int k = 0; k < refs; ++k) p.references.push_back(sentence(1));
    c.push_back(std::move(p));
  }
  return c;
}


}  // namespace avsd::testing
