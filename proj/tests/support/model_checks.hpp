#pragma once

// Tiny-model fixtures and whole-model oracles shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fatality/model.hpp"
#include "gradcheck.hpp"

namespace fatality::testing {

inline model::ModelConfig tiny_config(std::uint32_t vocab = 16, std::uint32_t seq = 6) {
  model::ModelConfig c;
  c.num_layers = 1;
  c.hidden = 8;
  c.heads = 2;
  c.ffn_dim = 32;
  c.vocab_size = vocab;
  c.max_positions = seq + 2;
  c.max_seq = seq;
  return c;
}

// Parameters far from the 0.02-std initializer, so every path carries a
// gradient well above rounding noise. Gammas stay near 1.
inline model::ParameterSet64 spread_params(const model::ModelConfig& config, std::uint64_t seed,
                                           double scale = 0.5) {
  Rng rng(seed);
  model::ParameterSet64 p;
  for (const auto& spec : model::parameter_layout(config)) {
    Tensor64 t(spec.dims);
    const bool gamma = spec.name.ends_with(".gamma");
    for (auto& v : t.values()) v = (gamma ? 1.0 : 0.0) + (2.0 * rng.uniform() - 1.0) * scale;
    p.add(spec.name, std::move(t));
  }
  return p;
}

// Real tokens: [CLS], random ids, [SEP]; then padding up to `width`.
inline tokenizer::EncodedInput random_input(const model::ModelConfig& config, Rng& rng,
                                            std::size_t real, std::size_t width) {
  tokenizer::EncodedInput e;
  e.input_word_ids.assign(width, 0);
  e.input_mask.assign(width, 0);
  e.input_type_ids.assign(width, 0);
  for (std::size_t i = 0; i < real; ++i) {
    e.input_mask[i] = 1;
    e.input_word_ids[i] = i == 0 ? 2
                          : i + 1 == real
                              ? 3
                              : static_cast<std::int32_t>(4 + rng.below(config.vocab_size - 4));
  }
  return e;
}

inline tokenizer::EncodedInput with_width(tokenizer::EncodedInput e, std::size_t width) {
  e.input_word_ids.resize(width, 0);
  e.input_mask.resize(width, 0);
  e.input_type_ids.resize(width, 0);
  return e;
}

struct ModelGradCheck {
  std::string worst_tensor;
  GradCheck worst;
  std::size_t tensors = 0;
  std::size_t entries = 0;
};

// Loss = mean BCE over a fixed batch, evaluated in training mode with the
// dropout stream replayed from the same seed on every call. The numeric side
// always runs in 64-bit; the analytic side runs in T.
template <typename T>
ModelGradCheck check_model_gradient(const model::ModelConfig& config,
                                    model::ParameterSet64 params64,
                                    const std::vector<tokenizer::EncodedInput>& batch,
                                    const std::vector<int>& labels, std::uint64_t dropout_seed) {
  auto bce_grad = [&](const auto& probs) {
    using V = typename std::decay_t<decltype(probs)>::value_type;
    std::vector<V> g(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
      g[i] = (probs[i] - static_cast<V>(labels[i])) / static_cast<V>(probs.size());
    return g;
  };
  auto loss64 = [&] {
    Rng rng(dropout_seed);
    const auto r = model::forward(params64, config, batch, true, rng);
    double sum = 0;
    for (std::size_t i = 0; i < r.logits.size(); ++i) {
      // Stable log-sigmoid form of BCE.
      const double z = r.logits[i];
      sum += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
    }
    return sum / static_cast<double>(r.logits.size());
  };

  const auto paramsT = params64.template cast<T>();
  Rng rng(dropout_seed);
  const auto fwd = model::forward(paramsT, config, batch, true, rng);
  const auto grad_logits = bce_grad(fwd.probabilities);
  const auto grads = model::backward(paramsT, config, fwd.cache, std::span<const T>(grad_logits));

  ModelGradCheck out;
  for (std::size_t i = 0; i < params64.size(); ++i) {
    const auto& name = params64.name(i);
    const auto g = check_gradient(params64.tensor(i).values(), grads.at(name), loss64);
    ++out.tensors;
    out.entries += params64.tensor(i).size();
    out.worst.checked += g.checked;
    out.worst.skipped += g.skipped;
    if (g.max_relative_error >= out.worst.max_relative_error) {
      const auto checked = out.worst.checked, skipped = out.worst.skipped;
      out.worst = g;
      out.worst.checked = checked;
      out.worst.skipped = skipped;
      out.worst_tensor = name;
    }
  }
  return out;
}

struct PaddingCheck {
  std::size_t inputs = 0;
  double max_difference = 0;
};

inline PaddingCheck check_padding_invariance(std::size_t inputs, std::uint64_t seed) {
  auto config = tiny_config(16, 24);
  const auto params = spread_params(config, seed).cast<float>();
  Rng rng(seed ^ 0x5eedULL);
  PaddingCheck out;
  for (std::size_t i = 0; i < inputs; ++i) {
    const std::size_t real = 2 + rng.below(10);
    const auto base = random_input(config, rng, real, real);
    const std::size_t width = real + 1 + rng.below(config.max_seq - real);
    auto padded = with_width(base, width);
    // Padded slots hold arbitrary ids; only the mask may matter.
    for (std::size_t j = real; j < width; ++j)
      padded.input_word_ids[j] = static_cast<std::int32_t>(rng.below(config.vocab_size));
    const std::vector<tokenizer::EncodedInput> pair{base, padded};
    const auto p = model::predict_proba(params, config, pair);
    out.max_difference = std::max(out.max_difference, static_cast<double>(std::abs(p[0] - p[1])));
    ++out.inputs;
  }
  return out;
}

}  // namespace fatality::testing
