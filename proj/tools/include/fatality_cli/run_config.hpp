#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fatality/corpus.hpp"
#include "fatality/model.hpp"
#include "fatality/training.hpp"

namespace fatality::cli {

// Flat key/value run configuration. Precedence, lowest first: built-in
// defaults, `key = value` config file, command-line flags. The effective
// settings are written next to every command's outputs.
class RunConfig {
 public:
  RunConfig();

  // Throws DataError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }

  // `key = value` lines; '#' starts a comment. Throws DataError on unknown
  // keys or malformed lines.
  void merge_file(const std::filesystem::path& path);
  void merge_text(const std::string& text, const std::string& origin = "config");

  // Sorted `key = value` lines.
  std::string dump() const;

  static const std::vector<std::string>& keys();

  // Typed views. Each throws DataError on unparsable values and runs the
  // matching validate().
  std::uint64_t seed() const;
  double threshold() const;
  std::size_t top_k() const;
  bool stratified() const;
  model::ModelConfig model_config(std::uint32_t vocab_size) const;
  training::TrainConfig train_config() const;
  // Counts for a corpus of `total` examples from paper_split, counts, or
  // ratios (in that order of preference).
  corpus::SplitCounts split_counts(std::size_t total) const;

  // Throws DataError when a path setting names a file that does not exist.
  void require_existing(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace fatality::cli
