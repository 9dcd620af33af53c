#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace fatality::analytics {

// Length distribution of a corpus, in Unicode scalars and whitespace-delimited
// words. Totals are kept so the means can be checked exactly.
struct LengthStats {
  double char_min = 0, char_mean = 0, char_max = 0;
  double word_min = 0, word_mean = 0, word_max = 0;
  std::size_t count = 0;
  std::uint64_t char_total = 0;
  std::uint64_t word_total = 0;
};

using Stopwords = std::set<std::string, std::less<>>;

struct WordCount {
  std::string word;
  std::uint64_t count = 0;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

// Ordered by count descending, then word ascending.
struct WordFrequencyTable {
  std::vector<WordCount> entries;

  std::uint64_t total() const noexcept;
};

// Throws DataError on an empty list.
LengthStats length_stats(const std::vector<std::string>& texts);

// Lowercased alphanumeric runs, minus stopwords, single characters, and
// all-digit tokens.
std::vector<std::string> content_words(std::string_view text, const Stopwords& stopwords);

WordFrequencyTable top_k_words(const std::vector<std::string>& texts, std::size_t k,
                               const Stopwords& stopwords);

WordFrequencyTable word_cloud_export(const std::vector<std::string>& texts,
                                     const Stopwords& stopwords);

// Built-in English function-word list.
const Stopwords& default_stopwords();

// One word per line; blank lines and lines starting with '#' are ignored.
Stopwords load_stopwords(const std::filesystem::path& path);

// `word<TAB>count` lines.
std::string format_table(const WordFrequencyTable& table);

// Header line plus one row; means at one decimal like the published table.
std::string format_length_stats(const LengthStats& stats);

}  // namespace fatality::analytics
