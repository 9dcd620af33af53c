#include "fatality/model.hpp"

#include "fatality/error.hpp"

namespace fatality::model {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw DataError("invalid model config: " + msg); };
  if (num_layers == 0 || hidden == 0 || heads == 0 || ffn_dim == 0 || vocab_size == 0 ||
      max_positions == 0 || max_seq == 0) {
    fail("all dimensions must be at least 1");
  }
  if (hidden % heads != 0) {
    fail("hidden size " + std::to_string(hidden) + " is not divisible by " +
         std::to_string(heads) + " heads");
  }
  if (max_seq > max_positions) {
    fail("max_seq " + std::to_string(max_seq) + " exceeds max_positions " +
         std::to_string(max_positions));
  }
  if (max_seq < 2) fail("max_seq must be at least 2");
  if (!(encoder_dropout >= 0.0 && encoder_dropout < 1.0)) fail("encoder dropout outside [0, 1)");
  if (!(head_dropout >= 0.0 && head_dropout < 1.0)) fail("head dropout outside [0, 1)");
}

bool ModelConfig::same_architecture(const ModelConfig& o) const noexcept {
  return num_layers == o.num_layers && hidden == o.hidden && heads == o.heads &&
         ffn_dim == o.ffn_dim && vocab_size == o.vocab_size &&
         max_positions == o.max_positions && max_seq == o.max_seq;
}

template <typename T>
void BasicParameterSet<T>::add(std::string name, BasicTensor<T> tensor) {
  if (index_.contains(name)) throw ShapeError("duplicate parameter name " + name);
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(tensor));
}

template <typename T>
bool BasicParameterSet<T>::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

template <typename T>
std::size_t BasicParameterSet<T>::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ShapeError("unknown parameter " + std::string(name));
  return it->second;
}

template <typename T>
BasicTensor<T>& BasicParameterSet<T>::at(std::string_view name) {
  return tensors_[index_of(name)];
}

template <typename T>
const BasicTensor<T>& BasicParameterSet<T>::at(std::string_view name) const {
  return tensors_[index_of(name)];
}

template <typename T>
BasicParameterSet<T> BasicParameterSet<T>::zeros_like() const {
  BasicParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], BasicTensor<T>(tensors_[i].dims()));
  return out;
}

template class BasicParameterSet<float>;
template class BasicParameterSet<double>;

std::vector<ParameterSpec> parameter_layout(const ModelConfig& c) {
  const std::size_t h = c.hidden, f = c.ffn_dim;
  std::vector<ParameterSpec> out{
      {"embeddings.word", {c.vocab_size, h}},
      {"embeddings.position", {c.max_positions, h}},
      {"embeddings.segment", {kSegmentVocab, h}},
      {"embeddings.ln.gamma", {h}},
      {"embeddings.ln.beta", {h}},
  };
  for (std::uint32_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* proj : {"query", "key", "value", "output"}) {
      out.push_back({p + "attention." + proj + ".weight", {h, h}});
      out.push_back({p + "attention." + proj + ".bias", {h}});
    }
    out.push_back({p + "attention.ln.gamma", {h}});
    out.push_back({p + "attention.ln.beta", {h}});
    out.push_back({p + "ffn.in.weight", {h, f}});
    out.push_back({p + "ffn.in.bias", {f}});
    out.push_back({p + "ffn.out.weight", {f, h}});
    out.push_back({p + "ffn.out.bias", {h}});
    out.push_back({p + "ffn.ln.gamma", {h}});
    out.push_back({p + "ffn.ln.beta", {h}});
  }
  out.push_back({"pooler.weight", {h, h}});
  out.push_back({"pooler.bias", {h}});
  out.push_back({"classifier.weight", {h, 1}});
  out.push_back({"classifier.bias", {1}});
  return out;
}

bool is_encoder_parameter(std::string_view name) noexcept {
  return !name.starts_with("pooler.") && !name.starts_with("classifier.");
}

bool applies_weight_decay(std::string_view name) noexcept {
  return !(name.ends_with(".bias") || name.ends_with(".gamma") || name.ends_with(".beta"));
}

ParameterSet init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed, Stream::kInit);
  ParameterSet params;
  for (auto& spec : parameter_layout(config)) {
    Tensor t(spec.dims);
    if (spec.name.ends_with(".gamma")) {
      t.fill(1.0f);
    } else if (!spec.name.ends_with(".bias") && !spec.name.ends_with(".beta")) {
      for (auto& v : t.values()) v = static_cast<float>(rng.truncated_normal(0.02));
    }
    params.add(std::move(spec.name), std::move(t));
  }
  return params;
}

template <typename T>
void validate_parameters(const BasicParameterSet<T>& params, const ModelConfig& config) {
  const auto layout = parameter_layout(config);
  for (const auto& spec : layout) {
    if (!params.contains(spec.name)) throw FormatError("missing tensor " + spec.name);
    const auto& dims = params.at(spec.name).dims();
    if (dims != spec.dims) {
      throw FormatError("tensor " + spec.name + " has shape " + dims_to_string(dims) +
                        ", expected " + dims_to_string(spec.dims));
    }
    if (!params.at(spec.name).all_finite()) {
      throw FormatError("tensor " + spec.name + " has non-finite values");
    }
  }
  if (params.size() != layout.size()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      bool known = false;
      for (const auto& spec : layout) known = known || spec.name == params.name(i);
      if (!known) throw FormatError("unexpected tensor " + params.name(i));
    }
  }
}

template void validate_parameters(const BasicParameterSet<float>&, const ModelConfig&);
template void validate_parameters(const BasicParameterSet<double>&, const ModelConfig&);

std::vector<float> predict_proba(const ParameterSet& params, const ModelConfig& config,
                                 std::span<const EncodedInput> inputs) {
  if (inputs.empty()) return {};
  Rng unused(0);
  return forward(params, config, inputs, /*training=*/false, unused).probabilities;
}

std::vector<int> threshold_labels(std::span<const float> probabilities, double threshold) {
  std::vector<int> labels;
  labels.reserve(probabilities.size());
  for (const float p : probabilities) labels.push_back(static_cast<double>(p) >= threshold ? 1 : 0);
  return labels;
}

std::vector<int> classify(const ParameterSet& params, const ModelConfig& config,
                          std::span<const EncodedInput> inputs, double threshold) {
  return threshold_labels(predict_proba(params, config, inputs), threshold);
}

}  // namespace fatality::model
