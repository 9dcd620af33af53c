#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fatality/kernels.hpp"
#include "fatality/rng.hpp"
#include "fatality/tensor.hpp"
#include "fatality/tokenizer.hpp"

namespace fatality::model {

using tokenizer::EncodedInput;

inline constexpr std::size_t kSegmentVocab = 2;
inline constexpr float kAttentionMaskValue = -1e9f;

struct ModelConfig {
  std::uint32_t num_layers = 4;
  std::uint32_t hidden = 512;
  std::uint32_t heads = 8;
  std::uint32_t ffn_dim = 2048;
  std::uint32_t vocab_size = 30522;
  std::uint32_t max_positions = 512;
  std::uint32_t max_seq = 128;
  // Not stored in weight files; training-time only.
  double encoder_dropout = 0.1;
  double head_dropout = 0.3;
  kernels::GeluMode gelu = kernels::GeluMode::kErf;

  std::uint32_t head_dim() const noexcept { return heads ? hidden / heads : 0; }

  // Throws DataError when hidden % heads != 0, max_seq > max_positions, any
  // dimension is zero, or a dropout rate is outside [0, 1).
  void validate() const;

  // Architecture fields only (the part stored in weight files).
  bool same_architecture(const ModelConfig& other) const noexcept;
};

// Named tensors in a fixed order. Gradient sets reuse the same type.
template <typename T>
class BasicParameterSet {
 public:
  void add(std::string name, BasicTensor<T> tensor);

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  BasicTensor<T>& tensor(std::size_t i) { return tensors_.at(i); }
  const BasicTensor<T>& tensor(std::size_t i) const { return tensors_.at(i); }

  bool contains(std::string_view name) const;
  // Throws ShapeError for an unknown name.
  BasicTensor<T>& at(std::string_view name);
  const BasicTensor<T>& at(std::string_view name) const;

  // Same names and shapes, all zeros.
  BasicParameterSet zeros_like() const;

  template <typename U>
  BasicParameterSet<U> cast() const {
    BasicParameterSet<U> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].template cast<U>());
    return out;
  }

  friend bool operator==(const BasicParameterSet& a, const BasicParameterSet& b) {
    return a.names_ == b.names_ && a.tensors_ == b.tensors_;
  }

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParameterSet = BasicParameterSet<float>;
using ParameterSet64 = BasicParameterSet<double>;

struct ParameterSpec {
  std::string name;
  Dims dims;
};

// Every tensor the model owns, in serialization order.
std::vector<ParameterSpec> parameter_layout(const ModelConfig& config);

// Encoder tensors are everything except pooler.* and classifier.*.
bool is_encoder_parameter(std::string_view name) noexcept;

// Biases and layer-norm scale/shift are excluded from weight decay.
bool applies_weight_decay(std::string_view name) noexcept;

// Weights ~ N(0, 0.02) truncated at 2 sigma; biases and betas 0; gammas 1.
ParameterSet init_params(const ModelConfig& config, std::uint64_t seed);

// Throws FormatError naming the first tensor that is missing, extra, or
// shaped differently from the layout of `config`.
template <typename T>
void validate_parameters(const BasicParameterSet<T>& params, const ModelConfig& config);

template <typename T>
struct LayerCache {
  BasicTensor<T> input;
  BasicTensor<T> q, k, v;
  std::vector<BasicTensor<T>> probs;  // one [n x n] matrix per head
  BasicTensor<T> context;
  std::vector<T> attn_dropout;
  BasicTensor<T> ln1_input;
  kernels::LayerNormResult<T> ln1;
  BasicTensor<T> ffn_pre;
  BasicTensor<T> ffn_act;
  std::vector<T> ffn_dropout;
  BasicTensor<T> ln2_input;
  kernels::LayerNormResult<T> ln2;
};

template <typename T>
struct ExampleCache {
  std::vector<std::int32_t> ids, types, mask;
  BasicTensor<T> embedding_sum;
  kernels::LayerNormResult<T> embedding_ln;
  std::vector<T> embedding_dropout;
  std::vector<LayerCache<T>> layers;
  BasicTensor<T> cls;     // [1 x H], final hidden state at position 0
  BasicTensor<T> pooled;  // [1 x H], tanh range
  std::vector<T> head_dropout;
  BasicTensor<T> head_input;  // pooled after dropout
};

template <typename T>
struct ForwardCache {
  std::vector<ExampleCache<T>> examples;
};

template <typename T>
struct ForwardResult {
  std::vector<T> probabilities;
  std::vector<T> logits;
  // Present iff the forward pass ran in training mode.
  std::optional<ForwardCache<T>> cache;
};

// Batch forward pass. Inputs may have any length up to max_positions.
// Throws DataError on an empty batch or malformed input and ShapeError on an
// out-of-range token id.
template <typename T>
ForwardResult<T> forward(const BasicParameterSet<T>& params, const ModelConfig& config,
                         std::span<const EncodedInput> batch, bool training, Rng& rng);

// Exact gradients of sum_i grad_logits[i] * logit_i with respect to every
// parameter. Throws Error if cache is empty.
template <typename T>
BasicParameterSet<T> backward(const BasicParameterSet<T>& params, const ModelConfig& config,
                              const std::optional<ForwardCache<T>>& cache,
                              std::span<const T> grad_logits);

// Inference-mode probabilities.
std::vector<float> predict_proba(const ParameterSet& params, const ModelConfig& config,
                                 std::span<const EncodedInput> inputs);

// label 1 iff probability >= threshold.
std::vector<int> classify(const ParameterSet& params, const ModelConfig& config,
                          std::span<const EncodedInput> inputs, double threshold = 0.5);
std::vector<int> threshold_labels(std::span<const float> probabilities, double threshold);

struct LoadedModel {
  ModelConfig config;
  ParameterSet params;
};

inline constexpr char kWeightMagic[4] = {'B', 'C', 'W', '1'};

// Little-endian binary weight file; see README for the layout.
void save_weights(const ParameterSet& params, const ModelConfig& config,
                  const std::filesystem::path& path);
std::string serialize_weights(const ParameterSet& params, const ModelConfig& config);

// Throws FormatError on bad magic, unsupported version, truncation, or a
// tensor set inconsistent with the embedded config.
LoadedModel load_weights(const std::filesystem::path& path);
LoadedModel deserialize_weights(std::string_view bytes);

}  // namespace fatality::model
