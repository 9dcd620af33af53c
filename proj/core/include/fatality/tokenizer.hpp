#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fatality::tokenizer {

using TokenId = std::int32_t;

inline constexpr std::size_t kDefaultMaxLen = 128;
inline constexpr std::size_t kMaxWordChars = 100;

inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kClsToken = "[CLS]";
inline constexpr std::string_view kSepToken = "[SEP]";

// Token <-> id table; ids are zero-based line indices of the vocab file.
// Immutable after construction.
class Vocabulary {
 public:
  // Throws DataError on an empty list, a duplicate token, or a missing
  // special token.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);

  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }

  TokenId pad_id() const noexcept { return pad_; }
  TokenId unk_id() const noexcept { return unk_; }
  TokenId cls_id() const noexcept { return cls_; }
  TokenId sep_id() const noexcept { return sep_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId, Hash, std::equal_to<>> ids_;
  TokenId pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0;
};

// The three parallel arrays the encoder consumes.
struct EncodedInput {
  std::vector<TokenId> input_word_ids;
  std::vector<std::int32_t> input_mask;
  std::vector<std::int32_t> input_type_ids;

  std::size_t length() const noexcept { return input_word_ids.size(); }
  std::size_t real_tokens() const noexcept;
};

// Uncased basic tokenization: drops control characters, isolates CJK
// characters and punctuation, lowercases, strips accents, and splits on
// whitespace.
std::vector<std::string> normalize(std::string_view text);

// Greedy longest-match-first subword split of one normalized word. Any
// unmatched position, or a word over kMaxWordChars code points, yields [UNK].
std::vector<TokenId> wordpiece(std::string_view word, const Vocabulary& vocab);

// All wordpieces of a text, untruncated.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);

// [CLS] + pieces (tail-truncated to max_len - 2) + [SEP], padded with [PAD].
// Requires max_len >= 2.
EncodedInput encode(std::string_view text, const Vocabulary& vocab,
                    std::size_t max_len = kDefaultMaxLen);

}  // namespace fatality::tokenizer
