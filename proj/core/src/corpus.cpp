#include "fatality/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "fatality/csv.hpp"
#include "fatality/error.hpp"
#include "fatality/rng.hpp"

namespace fatality::corpus {
namespace {

constexpr std::size_t kMaxReportedRowErrors = 20;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

std::optional<std::int64_t> parse_count(std::string_view raw) {
  const auto s = trim(raw);
  if (s.empty()) return std::nullopt;
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value < 0) return std::nullopt;
  return value;
}

std::optional<std::size_t> find_column(const csv::Row& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string_view h = header[i];
    if (i == 0 && h.starts_with("\xEF\xBB\xBF")) h.remove_prefix(3);  // UTF-8 BOM
    if (trim(h) == name) return i;
  }
  return std::nullopt;
}

// Largest-remainder apportionment of `total` units given exact rational
// shares numer[i] / denom. Ties go to the lower index.
std::vector<std::size_t> apportion(const std::vector<std::uint64_t>& numer, std::uint64_t denom,
                                   std::size_t total) {
  std::vector<std::size_t> out(numer.size());
  std::vector<std::uint64_t> rem(numer.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < numer.size(); ++i) {
    out[i] = static_cast<std::size_t>(numer[i] / denom);
    rem[i] = numer[i] % denom;
    assigned += out[i];
  }
  std::vector<std::size_t> order(numer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k % order.size()]];
  return out;
}

}  // namespace

std::string_view partition_name(Partition p) noexcept {
  switch (p) {
    case Partition::kTrain:
      return "train";
    case Partition::kValidation:
      return "validation";
    case Partition::kTest:
      return "test";
  }
  return "unknown";
}

std::vector<Partition> DatasetSplit::assignment() const {
  std::vector<Partition> out(train_indices.size() + validation_indices.size() +
                             test_indices.size());
  for (const auto i : train_indices) out.at(i) = Partition::kTrain;
  for (const auto i : validation_indices) out.at(i) = Partition::kValidation;
  for (const auto i : test_indices) out.at(i) = Partition::kTest;
  return out;
}

std::vector<EventRecord> parse_csv(std::string_view text, const CsvColumns& columns) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw DataError("CSV input has no header row");
  const auto& header = rows.front();
  const auto notes_col = find_column(header, columns.notes);
  const auto fatal_col = find_column(header, columns.fatalities);
  if (!notes_col) throw DataError("CSV header has no '" + columns.notes + "' column");
  if (!fatal_col) throw DataError("CSV header has no '" + columns.fatalities + "' column");
  const auto date_col = find_column(header, "event_date");
  const auto location_col = find_column(header, "location");

  std::vector<EventRecord> records;
  std::vector<std::string> problems;
  std::size_t bad_rows = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;  // blank line
    std::string problem;
    const auto need = std::max(*notes_col, *fatal_col) + 1;
    std::optional<std::int64_t> count;
    if (row.size() < need) {
      problem = "expected at least " + std::to_string(need) + " fields, found " +
                std::to_string(row.size());
    } else if (trim(row[*notes_col]).empty()) {
      problem = "empty '" + columns.notes + "'";
    } else if (!(count = parse_count(row[*fatal_col]))) {
      problem = "'" + columns.fatalities + "' is not a non-negative integer: '" +
                row[*fatal_col] + "'";
    }
    if (!problem.empty()) {
      if (++bad_rows <= kMaxReportedRowErrors) {
        problems.push_back("row " + std::to_string(r) + ": " + problem);
      }
      continue;
    }
    EventRecord rec;
    rec.notes = row[*notes_col];
    rec.fatalities = *count;
    if (date_col && *date_col < row.size()) rec.event_date = row[*date_col];
    if (location_col && *location_col < row.size()) rec.location = row[*location_col];
    records.push_back(std::move(rec));
  }
  if (bad_rows > 0) {
    std::string msg = std::to_string(bad_rows) + " invalid CSV row(s):";
    for (const auto& p : problems) msg += "\n  " + p;
    if (bad_rows > problems.size()) {
      msg += "\n  ... and " + std::to_string(bad_rows - problems.size()) + " more";
    }
    throw DataError(msg);
  }
  return records;
}

std::vector<EventRecord> load_csv(const std::filesystem::path& path, const CsvColumns& columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), columns);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_csv(const std::vector<EventRecord>& records) {
  std::string out = "notes,fatalities\n";
  for (const auto& r : records) {
    out += csv::format_row({r.notes, std::to_string(r.fatalities)});
    out += '\n';
  }
  return out;
}

std::vector<EventRecord> deduplicate(const std::vector<EventRecord>& records) {
  std::unordered_set<std::string_view> seen;
  std::vector<EventRecord> out;
  for (const auto& r : records) {
    if (seen.insert(r.notes).second) out.push_back(r);
  }
  return out;
}

std::vector<LabeledExample> binarize(const std::vector<EventRecord>& records) {
  std::vector<LabeledExample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.notes, r.fatalities > 0 ? 1 : 0});
  return out;
}

DatasetSplit split(const std::vector<LabeledExample>& examples, SplitCounts counts,
                   std::uint64_t seed, bool stratified) {
  if (counts.total() != examples.size()) {
    throw DataError("split counts " + std::to_string(counts.train) + "+" +
                    std::to_string(counts.validation) + "+" + std::to_string(counts.test) +
                    " = " + std::to_string(counts.total()) + " do not match corpus size " +
                    std::to_string(examples.size()));
  }
  Rng rng(seed, Stream::kSplit);
  const std::array<std::size_t, 3> sizes{counts.train, counts.validation, counts.test};
  std::array<std::vector<std::size_t>, 3> parts;

  if (stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      (examples[i].label ? pos : neg).push_back(i);
    }
    shuffle(pos, rng);
    shuffle(neg, rng);
    std::vector<std::uint64_t> shares;
    for (const auto n : sizes) shares.push_back(static_cast<std::uint64_t>(n) * pos.size());
    const auto quota = examples.empty()
                           ? std::vector<std::size_t>(3, 0)
                           : apportion(shares, examples.size(), pos.size());
    std::size_t p = 0, q = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < quota[s]; ++k) parts[s].push_back(pos[p++]);
      for (std::size_t k = quota[s]; k < sizes[s]; ++k) parts[s].push_back(neg[q++]);
    }
  } else {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    std::size_t next = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < sizes[s]; ++k) parts[s].push_back(order[next++]);
    }
  }

  DatasetSplit out;
  out.seed = seed;
  out.stratified = stratified;
  for (auto& part : parts) std::sort(part.begin(), part.end());
  auto gather = [&](const std::vector<std::size_t>& idx) {
    std::vector<LabeledExample> v;
    v.reserve(idx.size());
    for (const auto i : idx) v.push_back(examples[i]);
    return v;
  };
  out.train = gather(parts[0]);
  out.validation = gather(parts[1]);
  out.test = gather(parts[2]);
  out.train_indices = std::move(parts[0]);
  out.validation_indices = std::move(parts[1]);
  out.test_indices = std::move(parts[2]);
  return out;
}

SplitCounts counts_from_ratios(std::array<double, 3> ratios, std::size_t total) {
  double sum = 0;
  for (const auto r : ratios) {
    if (!(r >= 0.0)) throw DataError("split ratios must be non-negative");
    sum += r;
  }
  if (!(sum > 0.0)) throw DataError("split ratios must have a positive sum");
  std::array<std::size_t, 3> out{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] / sum * static_cast<double>(total);
    out[i] = static_cast<std::size_t>(exact);
    rem[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k % 3]];
  return {out[0], out[1], out[2]};
}

std::string format_manifest(const DatasetSplit& split) {
  std::ostringstream out;
  out << "# seed=" << split.seed << '\n';
  out << "# stratified=" << (split.stratified ? "true" : "false") << '\n';
  out << "# counts=" << split.train.size() << ',' << split.validation.size() << ','
      << split.test.size() << '\n';
  const auto parts = split.assignment();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    out << i << '\t' << partition_name(parts[i]) << '\n';
  }
  return out.str();
}

}  // namespace fatality::corpus
