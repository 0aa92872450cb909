#include "avsd/textpiece.hpp"

#include <map>
#include <set>
#include <sstream>

#include "avsd/binio.hpp"
#include "avsd/error.hpp"

namespace avsd::text {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> s{"<pad>", "<bos>", "<eos>", "<unk>", "<video>", "<q>", "<a>"};
  return s;
}

Vocab::Vocab() {
  for (const auto& s : special_tokens()) add(s);
}

Vocab::Vocab(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() || !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw FormatError("vocabulary must start with the special tokens in canonical order");
  }
  for (auto& t : tokens) {
    if (t.empty()) throw FormatError("vocabulary has an empty token at line " + std::to_string(tokens_.size() + 1));
    if (contains(t)) throw FormatError("vocabulary has duplicate token '" + t + "'");
    add(t);
  }
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw RangeError("token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::add(const std::string& token) {
  if (auto id = find(token)) return *id;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

void Vocab::save(const std::string& path) const {
  std::string out;
  for (const auto& t : tokens_) out += t + "\n";
  binio::write_file(path, out);
}

Vocab Vocab::load(const std::string& path) {
  std::istringstream in(binio::read_file(path));
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  try {
    return Vocab(std::move(tokens));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

namespace {
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string strip_continuation(const std::string& piece) {
  return piece.rfind(kContinuation, 0) == 0 ? piece.substr(kContinuation.size()) : piece;
}
}  // namespace

std::string normalize(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::istringstream in(normalize(s));
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::vector<std::string> code_points(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 1;
    if (i + len > word.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) {
        len = 1;  // malformed sequence: treat the lead byte on its own
        break;
      }
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

Vocab train_vocab(const std::vector<std::string>& lines, std::size_t target_size) {
  std::map<std::string, long> word_freq;
  for (const auto& line : lines) {
    for (auto& w : split_words(line)) ++word_freq[w];
  }
  if (word_freq.empty()) throw InputError("train_vocab: corpus has no words");

  std::set<std::string> alphabet;
  std::vector<std::pair<std::vector<std::string>, long>> words;
  for (const auto& [w, f] : word_freq) {
    auto cps = code_points(w);
    std::vector<std::string> pieces;
    for (std::size_t i = 0; i < cps.size(); ++i) {
      alphabet.insert(cps[i]);
      pieces.push_back(i == 0 ? cps[i] : std::string(kContinuation) + cps[i]);
    }
    words.emplace_back(std::move(pieces), f);
  }

  Vocab vocab;
  // Both forms of every character, so any corpus word stays encodable whatever merges follow.
  for (const auto& c : alphabet) vocab.add(c);
  for (const auto& c : alphabet) vocab.add(std::string(kContinuation) + c);
  if (target_size < vocab.size()) {
    throw ConfigError("vocabulary size " + std::to_string(target_size) + " is below the " +
                      std::to_string(vocab.size()) + " specials and characters of the corpus");
  }

  while (vocab.size() < target_size) {
    std::map<std::pair<std::string, std::string>, long> pairs;
    for (const auto& [pieces, f] : words) {
      for (std::size_t i = 0; i + 1 < pieces.size(); ++i) pairs[{pieces[i], pieces[i + 1]}] += f;
    }
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string merged = left + strip_continuation(right);
    for (auto& [pieces, f] : words) {
      std::vector<std::string> next;
      for (std::size_t i = 0; i < pieces.size(); ++i) {
        if (i + 1 < pieces.size() && pieces[i] == left && pieces[i + 1] == right) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(pieces[i]);
        }
      }
      pieces = std::move(next);
    }
    vocab.add(merged);
  }
  return vocab;
}

TokenIds encode(std::string_view text, const Vocab& vocab) {
  TokenIds ids;
  for (const auto& word : split_words(text)) {
    const auto cps = code_points(word);
    std::size_t start = 0;
    while (start < cps.size()) {
      std::optional<TokenId> match;
      std::size_t match_end = start;
      std::string piece = start == 0 ? "" : std::string(kContinuation);
      for (std::size_t end = start; end < cps.size(); ++end) {
        piece += cps[end];
        auto id = vocab.find(piece);
        if (id && *id >= kSpecialCount) {
          match = id;
          match_end = end + 1;
        }
      }
      if (match) {
        ids.push_back(*match);
        start = match_end;
      } else {
        ids.push_back(kUnk);
        ++start;
      }
    }
  }
  return ids;
}

std::string decode(const TokenIds& ids, const Vocab& vocab) {
  std::string out;
  for (auto id : ids) {
    const auto& tok = vocab.token(id);
    if (id < kSpecialCount && id != kUnk) continue;
    const bool joins = tok.rfind(kContinuation, 0) == 0 && tok.size() > kContinuation.size();
    if (joins) {
      out += tok.substr(kContinuation.size());
    } else {
      if (!out.empty()) out.push_back(' ');
      out += tok;
    }
  }
  return out;
}

}  // namespace avsd::text
