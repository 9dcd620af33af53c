#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fatality::corpus {

struct EventRecord {
  std::string notes;
  std::int64_t fatalities = 0;
  std::optional<std::string> event_date;
  std::optional<std::string> location;
};

struct LabeledExample {
  std::string text;
  int label = 0;  // 1 = fatal
};

// Sizes of the train, validation, and test partitions.
struct SplitCounts {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  std::size_t total() const noexcept { return train + validation + test; }
};

// The published 3826 / 426 / 500 partition of the 4752-event corpus.
inline constexpr SplitCounts kPaperSplit{3826, 426, 500};

enum class Partition { kTrain, kValidation, kTest };

std::string_view partition_name(Partition p) noexcept;

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  // Source positions of each partition, ascending.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
  bool stratified = true;

  // Partition of every source index, in source order.
  std::vector<Partition> assignment() const;
};

struct CsvColumns {
  std::string notes = "notes";
  std::string fatalities = "fatalities";
};

// Reads an ACLED-style export. Optional event_date/location columns are
// picked up when present. Throws DataError for a missing file, missing
// column, malformed quoting, or any bad rows (all bad rows are listed,
// 1-based over data rows).
std::vector<EventRecord> load_csv(const std::filesystem::path& path,
                                  const CsvColumns& columns = {});
std::vector<EventRecord> parse_csv(std::string_view text, const CsvColumns& columns = {});

// Writes records back out with a `notes,fatalities` header.
std::string format_csv(const std::vector<EventRecord>& records);

// Drops exact byte-equal repeats of notes; keeps first occurrences in order.
std::vector<EventRecord> deduplicate(const std::vector<EventRecord>& records);

// label = 1 iff fatalities > 0.
std::vector<LabeledExample> binarize(const std::vector<EventRecord>& records);

// Seeded partition. Stratified mode allocates positives to each partition by
// largest remainder and shuffles each class separately. Throws DataError when
// counts do not sum to the number of examples.
DatasetSplit split(const std::vector<LabeledExample>& examples, SplitCounts counts,
                   std::uint64_t seed, bool stratified = true);

// Converts ratios to counts summing to total by largest remainder (ties go to
// the earlier partition). Ratios must be non-negative with a positive sum.
SplitCounts counts_from_ratios(std::array<double, 3> ratios, std::size_t total);

// Replay manifest: `# key=value` header lines then `index<TAB>partition`.
std::string format_manifest(const DatasetSplit& split);

}  // namespace fatality::corpus
