#include "fatality/analytics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "fatality/error.hpp"
#include "unicode.hpp"

namespace fatality::analytics {

std::uint64_t WordFrequencyTable::total() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& e : entries) sum += e.count;
  return sum;
}

LengthStats length_stats(const std::vector<std::string>& texts) {
  if (texts.empty()) throw DataError("length_stats: no texts");
  LengthStats s;
  std::uint64_t cmin = std::numeric_limits<std::uint64_t>::max(), cmax = 0;
  std::uint64_t wmin = cmin, wmax = 0;
  for (const auto& text : texts) {
    const auto chars = unicode::decode(text);
    std::uint64_t words = 0;
    bool in_word = false;
    for (const char32_t c : chars) {
      const bool space = unicode::is_any_whitespace(c);
      if (!space && !in_word) ++words;
      in_word = !space;
    }
    const std::uint64_t n = chars.size();
    cmin = std::min(cmin, n);
    cmax = std::max(cmax, n);
    wmin = std::min(wmin, words);
    wmax = std::max(wmax, words);
    s.char_total += n;
    s.word_total += words;
  }
  s.count = texts.size();
  const auto count = static_cast<double>(s.count);
  s.char_min = static_cast<double>(cmin);
  s.char_max = static_cast<double>(cmax);
  s.char_mean = static_cast<double>(s.char_total) / count;
  s.word_min = static_cast<double>(wmin);
  s.word_max = static_cast<double>(wmax);
  s.word_mean = static_cast<double>(s.word_total) / count;
  return s;
}

std::vector<std::string> content_words(std::string_view text, const Stopwords& stopwords) {
  std::vector<std::string> out;
  auto flush = [&](std::u32string& word) {
    if (word.size() > 1 &&
        !std::all_of(word.begin(), word.end(), [](char32_t c) { return unicode::is_digit(c); })) {
      auto utf8 = unicode::encode(word);
      if (!stopwords.contains(utf8)) out.push_back(std::move(utf8));
    }
    word.clear();
  };
  std::u32string word;
  for (const char32_t c : unicode::to_lower(unicode::decode(text))) {
    if (unicode::is_alphanumeric(c)) {
      word.push_back(c);
    } else {
      flush(word);
    }
  }
  flush(word);
  return out;
}

WordFrequencyTable word_cloud_export(const std::vector<std::string>& texts,
                                     const Stopwords& stopwords) {
  std::map<std::string, std::uint64_t, std::less<>> counts;
  for (const auto& text : texts) {
    for (auto& w : content_words(text, stopwords)) ++counts[std::move(w)];
  }
  WordFrequencyTable table;
  table.entries.reserve(counts.size());
  for (auto& [word, count] : counts) table.entries.push_back({word, count});
  // counts is already word-ascending, so a stable sort by count keeps ties ordered.
  std::stable_sort(table.entries.begin(), table.entries.end(),
                   [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  return table;
}

WordFrequencyTable top_k_words(const std::vector<std::string>& texts, std::size_t k,
                               const Stopwords& stopwords) {
  if (k == 0) throw DataError("top_k_words: k must be at least 1");
  auto table = word_cloud_export(texts, stopwords);
  if (table.entries.size() > k) table.entries.resize(k);
  return table;
}

const Stopwords& default_stopwords() {
  static const Stopwords words = {
      "a",        "about",    "above",   "after",      "again",   "against", "ain",
      "all",      "am",       "an",      "and",        "any",     "are",     "aren",
      "aren't",   "as",       "at",      "be",         "because", "been",    "before",
      "being",    "below",    "between", "both",       "but",     "by",      "can",
      "couldn",   "couldn't", "d",       "did",        "didn",    "didn't",  "do",
      "does",     "doesn",    "doesn't", "doing",      "don",     "don't",   "down",
      "during",   "each",     "few",     "for",        "from",    "further", "had",
      "hadn",     "hadn't",   "has",     "hasn",       "hasn't",  "have",    "haven",
      "haven't",  "having",   "he",      "her",        "here",    "hers",    "herself",
      "him",      "himself",  "his",     "how",        "i",       "if",      "in",
      "into",     "is",       "isn",     "isn't",      "it",      "it's",    "its",
      "itself",   "just",     "ll",      "m",          "ma",      "me",      "mightn",
      "mightn't", "more",     "most",    "mustn",      "mustn't", "my",      "myself",
      "needn",    "needn't",  "no",      "nor",        "not",     "now",     "o",
      "of",       "off",      "on",      "once",       "only",    "or",      "other",
      "our",      "ours",     "ourselves", "out",      "over",    "own",     "re",
      "s",        "same",     "shan",    "shan't",     "she",     "she's",   "should",
      "should've", "shouldn", "shouldn't", "so",       "some",    "such",    "t",
      "than",     "that",     "that'll", "the",        "their",   "theirs",  "them",
      "themselves", "then",   "there",   "these",      "they",    "this",    "those",
      "through",  "to",       "too",     "under",      "until",   "up",      "ve",
      "very",     "was",      "wasn",    "wasn't",     "we",      "were",    "weren",
      "weren't",  "what",     "when",    "where",      "which",   "while",   "who",
      "whom",     "why",      "will",    "with",       "won",     "won't",   "wouldn",
      "wouldn't", "y",        "you",     "you'd",      "you'll",  "you're",  "you've",
      "your",     "yours",    "yourself", "yourselves",
  };
  return words;
}

Stopwords load_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stopword file " + path.string());
  Stopwords words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
      line.pop_back();
    }
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    words.insert(unicode::encode(unicode::to_lower(unicode::decode(line.substr(first)))));
  }
  return words;
}

std::string format_table(const WordFrequencyTable& table) {
  std::string out;
  for (const auto& e : table.entries) {
    out += e.word;
    out += '\t';
    out += std::to_string(e.count);
    out += '\n';
  }
  return out;
}

std::string format_length_stats(const LengthStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "char_min\tchar_mean\tchar_max\tword_min\tword_mean\tword_max\n"
                "%.0f\t%.1f\t%.0f\t%.0f\t%.1f\t%.0f\n",
                s.char_min, s.char_mean, s.char_max, s.word_min, s.word_mean, s.word_max);
  return buf;
}

}  // namespace fatality::analytics
