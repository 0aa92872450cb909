#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace avsd::text {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

inline constexpr std::string_view kContinuation = "##";

// Fixed special ids; every vocabulary starts with these in this order.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kVideo = 4;
inline constexpr TokenId kQuestion = 5;
inline constexpr TokenId kAnswer = 6;
inline constexpr TokenId kSpecialCount = 7;

const std::vector<std::string>& special_tokens();

class Vocab {
 public:
  Vocab();  // specials only
  explicit Vocab(std::vector<std::string> tokens);  // FormatError unless specials lead, no duplicates

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;  // RangeError when out of range
  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Returns the existing id when the token is already present.
  TokenId add(const std::string& token);

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// ASCII lowercase, whitespace runs collapsed to one space, trimmed.
std::string normalize(std::string_view s);
std::vector<std::string> split_words(std::string_view s);
std::vector<std::string> code_points(std::string_view word);

// Starts from every code point of the corpus (word-initial and "##" forms),
// then adds the most frequent adjacent piece pair until `target_size`.
Vocab train_vocab(const std::vector<std::string>& lines, std::size_t target_size);

// Greedy longest match per word; unmatched code points become <unk>.
TokenIds encode(std::string_view text, const Vocab& vocab);

// Joins "##" pieces onto the previous word. Specials are dropped except <unk>,
// which is rendered literally so unknown input stays visible.
std::string decode(const TokenIds& ids, const Vocab& vocab);

}  // namespace avsd::text
