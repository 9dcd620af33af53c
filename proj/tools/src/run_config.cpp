#include "fatality_cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fatality/error.hpp"

namespace fatality::cli {
namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> values = {
      {"batch_size", "32"},
      {"beta1", "0.9"},
      {"beta2", "0.999"},
      {"counts", ""},
      {"data", ""},
      {"dropout", "0.3"},
      {"encoder_dropout", "0.1"},
      {"epochs", "10"},
      {"epsilon", "1e-08"},
      {"ffn_dim", "2048"},
      {"freeze_encoder", "false"},
      {"gelu", "erf"},
      {"grad_clip_norm", "1.0"},
      {"heads", "8"},
      {"hidden", "512"},
      {"input", ""},
      {"k", "10"},
      {"layers", "4"},
      {"lr", "3e-05"},
      {"max_positions", "512"},
      {"max_seq", "128"},
      {"out", ""},
      {"paper_split", "false"},
      {"ratios", "0.8,0.1,0.1"},
      {"seed", "42"},
      {"stopwords", ""},
      {"stratified", "true"},
      {"text", ""},
      {"threshold", "0.5"},
      {"vocab", ""},
      {"warmup_fraction", "0.1"},
      {"weight_decay", "0.01"},
      {"weights", ""},
  };
  return values;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::uint32_t parse_u32(const std::string& key, const std::string& value) {
  const auto v = parse_u64(key, value);
  if (v > 0xFFFFFFFFULL) throw DataError("setting '" + key + "' is too large: " + value);
  return static_cast<std::uint32_t>(v);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

}  // namespace

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const auto s = trim(value);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("setting '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  const auto s = trim(value);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("setting '" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto s = trim(value);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw DataError("setting '" + key + "' expects true or false, got '" + value + "'");
}

RunConfig::RunConfig() : values_(defaults()) {}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : defaults()) k.push_back(key);
    return k;
  }();
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw DataError("unknown setting '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw DataError("unknown setting '" + key + "'");
  return it->second;
}

void RunConfig::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    auto key = trim(line.substr(0, eq));
    for (auto& c : key) {
      if (c == '-') c = '_';
    }
    try {
      set(key, trim(line.substr(eq + 1)));
    } catch (const DataError& e) {
      throw DataError(origin + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::uint64_t RunConfig::seed() const { return parse_u64("seed", get("seed")); }

double RunConfig::threshold() const {
  const double t = parse_double("threshold", get("threshold"));
  if (!(t >= 0.0 && t <= 1.0)) throw DataError("threshold must be in [0, 1]");
  return t;
}

std::size_t RunConfig::top_k() const {
  const auto k = parse_u64("k", get("k"));
  if (k < 1) throw DataError("k must be at least 1");
  return static_cast<std::size_t>(k);
}

bool RunConfig::stratified() const { return parse_bool("stratified", get("stratified")); }

model::ModelConfig RunConfig::model_config(std::uint32_t vocab_size) const {
  model::ModelConfig c;
  c.num_layers = parse_u32("layers", get("layers"));
  c.hidden = parse_u32("hidden", get("hidden"));
  c.heads = parse_u32("heads", get("heads"));
  c.ffn_dim = parse_u32("ffn_dim", get("ffn_dim"));
  c.max_positions = parse_u32("max_positions", get("max_positions"));
  c.max_seq = parse_u32("max_seq", get("max_seq"));
  c.vocab_size = vocab_size;
  c.head_dropout = parse_double("dropout", get("dropout"));
  c.encoder_dropout = parse_double("encoder_dropout", get("encoder_dropout"));
  const auto& gelu = get("gelu");
  if (gelu == "erf") {
    c.gelu = kernels::GeluMode::kErf;
  } else if (gelu == "tanh") {
    c.gelu = kernels::GeluMode::kTanh;
  } else {
    throw DataError("setting 'gelu' must be erf or tanh, got '" + gelu + "'");
  }
  c.validate();
  return c;
}

training::TrainConfig RunConfig::train_config() const {
  training::TrainConfig c;
  c.epochs = parse_u32("epochs", get("epochs"));
  c.base_lr = parse_double("lr", get("lr"));
  c.warmup_fraction = parse_double("warmup_fraction", get("warmup_fraction"));
  c.batch_size = parse_u32("batch_size", get("batch_size"));
  c.weight_decay = parse_double("weight_decay", get("weight_decay"));
  c.beta1 = parse_double("beta1", get("beta1"));
  c.beta2 = parse_double("beta2", get("beta2"));
  c.epsilon = parse_double("epsilon", get("epsilon"));
  c.seed = seed();
  const auto& clip = get("grad_clip_norm");
  if (clip == "none" || clip.empty()) {
    c.grad_clip_norm.reset();
  } else {
    c.grad_clip_norm = parse_double("grad_clip_norm", clip);
  }
  c.freeze_encoder = parse_bool("freeze_encoder", get("freeze_encoder"));
  c.validate();
  return c;
}

corpus::SplitCounts RunConfig::split_counts(std::size_t total) const {
  if (parse_bool("paper_split", get("paper_split"))) return corpus::kPaperSplit;
  if (has_value("counts")) {
    const auto parts = split_list(get("counts"));
    if (parts.size() != 3) throw DataError("counts expects three comma-separated integers");
    return {static_cast<std::size_t>(parse_u64("counts", parts[0])),
            static_cast<std::size_t>(parse_u64("counts", parts[1])),
            static_cast<std::size_t>(parse_u64("counts", parts[2]))};
  }
  const auto parts = split_list(get("ratios"));
  if (parts.size() != 3) throw DataError("ratios expects three comma-separated numbers");
  return corpus::counts_from_ratios(
      {parse_double("ratios", parts[0]), parse_double("ratios", parts[1]),
       parse_double("ratios", parts[2])},
      total);
}

void RunConfig::require_existing(const std::string& key) const {
  const auto& path = get(key);
  if (path.empty()) throw DataError("missing required setting --" + key);
  if (!std::filesystem::exists(path)) {
    throw DataError("--" + key + " path does not exist: " + path);
  }
}

}  // namespace fatality::cli
