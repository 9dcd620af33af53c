#include "fatality/tokenizer.hpp"

#include <algorithm>
#include <fstream>

#include "fatality/error.hpp"
#include "unicode.hpp"

namespace fatality::tokenizer {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw DataError("vocabulary is empty");
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary token '" + tokens_[i] + "' at line " +
                      std::to_string(i + 1));
    }
  }
  auto special = [&](std::string_view name) {
    const auto id = find(name);
    if (!id) throw DataError("vocabulary is missing special token " + std::string(name));
    return *id;
  };
  pad_ = special(kPadToken);
  unk_ = special(kUnkToken);
  cls_ = special(kClsToken);
  sep_ = special(kSepToken);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  try {
    return Vocabulary(std::move(tokens));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  const auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t EncodedInput::real_tokens() const noexcept {
  return static_cast<std::size_t>(std::count(input_mask.begin(), input_mask.end(), 1));
}

namespace {

std::vector<std::u32string> split_whitespace(std::u32string_view text) {
  std::vector<std::u32string> out;
  std::u32string cur;
  for (const char32_t c : text) {
    if (unicode::is_whitespace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

std::vector<std::string> normalize(std::string_view text) {
  std::u32string cleaned;
  for (const char32_t c : unicode::decode(text)) {
    if (c == 0 || c == U'�' || unicode::is_control(c)) continue;
    if (unicode::is_whitespace(c)) {
      cleaned.push_back(U' ');
    } else if (unicode::is_cjk(c)) {
      cleaned += U' ';
      cleaned.push_back(c);
      cleaned += U' ';
    } else {
      cleaned.push_back(c);
    }
  }

  std::vector<std::string> out;
  for (const auto& word : split_whitespace(cleaned)) {
    std::u32string stripped;
    for (const char32_t c : unicode::nfd(unicode::to_lower(word))) {
      if (!unicode::is_combining_mark(c)) stripped.push_back(c);
    }
    std::u32string cur;
    for (const char32_t c : stripped) {
      if (unicode::is_punctuation(c)) {
        if (!cur.empty()) out.push_back(unicode::encode(cur));
        cur.clear();
        out.push_back(unicode::encode(c));
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) out.push_back(unicode::encode(cur));
  }
  return out;
}

std::vector<TokenId> wordpiece(std::string_view word, const Vocabulary& vocab) {
  const auto chars = unicode::decode(word);
  if (chars.empty()) return {};
  if (chars.size() > kMaxWordChars) return {vocab.unk_id()};

  // Byte offset of each code point boundary.
  std::vector<std::size_t> offsets{0};
  for (const char32_t c : chars) offsets.push_back(offsets.back() + unicode::encode(c).size());
  const std::string bytes = unicode::encode(chars);

  std::vector<TokenId> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < chars.size()) {
    std::optional<TokenId> match;
    std::size_t end = chars.size();
    for (; end > start; --end) {
      candidate.assign(start > 0 ? "##" : "");
      candidate.append(bytes, offsets[start], offsets[end] - offsets[start]);
      if ((match = vocab.find(candidate))) break;
    }
    if (!match) return {vocab.unk_id()};
    pieces.push_back(*match);
    start = end;
  }
  return pieces;
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  for (const auto& word : normalize(text)) {
    const auto pieces = wordpiece(word, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

EncodedInput encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw DataError("encode: max_len must be at least 2");
  auto pieces = tokenize(text, vocab);
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);

  EncodedInput enc;
  enc.input_word_ids.assign(max_len, vocab.pad_id());
  enc.input_mask.assign(max_len, 0);
  enc.input_type_ids.assign(max_len, 0);
  enc.input_word_ids[0] = vocab.cls_id();
  std::copy(pieces.begin(), pieces.end(), enc.input_word_ids.begin() + 1);
  enc.input_word_ids[pieces.size() + 1] = vocab.sep_id();
  std::fill_n(enc.input_mask.begin(), pieces.size() + 2, 1);
  return enc;
}

}  // namespace fatality::tokenizer
