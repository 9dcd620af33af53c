#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fatality/error.hpp"
#include "fatality/model.hpp"

namespace fatality::model {
namespace {

template <typename U>
void put(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("weight file truncated while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_weights(const ParameterSet& params, const ModelConfig& config) {
  validate_parameters(params, config);
  std::string out(kWeightMagic, sizeof kWeightMagic);
  for (const std::uint32_t v : {config.num_layers, config.hidden, config.heads, config.ffn_dim,
                                config.vocab_size, config.max_positions, config.max_seq}) {
    put(out, v);
  }
  put(out, static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    const auto& t = params.tensor(i);
    put(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put(out, static_cast<std::uint8_t>(t.rank()));
    for (const auto d : t.dims()) put(out, static_cast<std::uint32_t>(d));
    for (const float v : t.values()) put(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void save_weights(const ParameterSet& params, const ModelConfig& config,
                  const std::filesystem::path& path) {
  const auto bytes = serialize_weights(params, config);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write weight file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing weight file " + path.string());
}

LoadedModel deserialize_weights(std::string_view bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (magic.substr(0, 3) != std::string_view(kWeightMagic, 3)) {
    throw FormatError("not a weight file (bad magic bytes)");
  }
  if (magic[3] != kWeightMagic[3]) {
    throw FormatError("unsupported weight file version '" + std::string(1, magic[3]) +
                      "' (expected '" + std::string(1, kWeightMagic[3]) + "')");
  }
  LoadedModel model;
  auto& c = model.config;
  for (std::uint32_t* field : {&c.num_layers, &c.hidden, &c.heads, &c.ffn_dim, &c.vocab_size,
                               &c.max_positions, &c.max_seq}) {
    *field = in.get<std::uint32_t>("config header");
  }
  try {
    c.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("weight file header: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = in.get<std::uint16_t>("tensor name length");
    std::string name(in.take(name_len, "tensor name"));
    const auto rank = in.get<std::uint8_t>("tensor rank");
    Dims dims(rank);
    // Bounded by the remaining payload, so crafted dims cannot overflow.
    std::size_t n = 1;
    for (auto& d : dims) {
      d = in.get<std::uint32_t>("tensor dims");
      if (d != 0 && n > in.remaining() / 4 / d) {
        throw FormatError("weight file truncated while reading tensor data for " + name);
      }
      n *= d;
    }
    const auto raw = in.take(n * 4, "tensor data");
    std::vector<float> data(n);
    Reader values(raw);
    for (auto& v : data) v = std::bit_cast<float>(values.get<std::uint32_t>("tensor data"));
    if (model.params.contains(name)) throw FormatError("duplicate tensor " + name);
    model.params.add(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after last tensor");
  validate_parameters(model.params, model.config);
  return model;
}

LoadedModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weight file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_weights(buf.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace fatality::model
