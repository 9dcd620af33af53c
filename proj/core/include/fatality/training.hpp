#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fatality/corpus.hpp"
#include "fatality/metrics.hpp"
#include "fatality/model.hpp"
#include "fatality/tokenizer.hpp"

namespace fatality::training {

struct TrainConfig {
  std::uint32_t epochs = 10;
  double base_lr = 3e-5;
  double warmup_fraction = 0.10;
  std::uint32_t batch_size = 32;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::optional<double> grad_clip_norm = 1.0;
  bool freeze_encoder = false;

  // Throws DataError on epochs == 0, batch_size == 0, base_lr <= 0, or a
  // warmup fraction outside [0, 1).
  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

struct LossResult {
  double loss = 0;
  // d loss / d logit per example: (p - y) / batch.
  std::vector<double> grad_logits;
};

// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
LossResult bce_loss(std::span<const double> probabilities, std::span<const int> labels);
LossResult bce_loss(std::span<const float> probabilities, std::span<const int> labels);

// Number of warmup steps: round(warmup_fraction * total_steps).
std::uint64_t warmup_steps(std::uint64_t total_steps, const TrainConfig& config);

// Linear rise to base_lr over the warmup steps, then linear decay reaching
// zero at step S. Throws DataError when step is outside [0, S).
double lr_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& config);

template <typename T>
struct BasicOptimizerState {
  model::BasicParameterSet<T> m;
  model::BasicParameterSet<T> v;
  std::uint64_t step = 0;

  static BasicOptimizerState zeros_like(const model::BasicParameterSet<T>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

using OptimizerState = BasicOptimizerState<float>;

// One AdamW update with decoupled weight decay using the pre-update value:
//   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
// Parameters for which model::applies_weight_decay is false get no decay.
// With freeze_encoder set, encoder tensors are left untouched.
template <typename T>
void adamw_step(model::BasicParameterSet<T>& params, const model::BasicParameterSet<T>& grads,
                BasicOptimizerState<T>& state, double lr, const TrainConfig& config);

// Scales grads in place so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
template <typename T>
double clip_global_norm(model::BasicParameterSet<T>& grads, double max_norm);

struct EpochLog {
  std::uint32_t epoch = 0;
  double train_loss = 0;
  metrics::EvaluationReport validation;
};

// One JSON object per line.
std::string format_log_line(const EpochLog& entry);

struct TrainResult {
  model::ParameterSet final_params;
  model::ParameterSet best_params;
  std::uint32_t best_epoch = 0;
  std::vector<EpochLog> log;
  std::vector<double> step_losses;
  std::uint64_t total_steps = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Encodes every text once at config.max_seq.
std::vector<tokenizer::EncodedInput> encode_all(const std::vector<corpus::LabeledExample>& examples,
                                                const tokenizer::Vocabulary& vocab,
                                                std::size_t max_len);

metrics::EvaluationReport evaluate(const model::ParameterSet& params,
                                   const model::ModelConfig& config,
                                   std::span<const tokenizer::EncodedInput> inputs,
                                   std::span<const int> labels, double threshold = 0.5);

// Mini-batch training loop. Throws DataError for an empty training split and
// NumericalError (with the step index) on a non-finite loss.
TrainResult train(model::ParameterSet params, const corpus::DatasetSplit& splits,
                  const tokenizer::Vocabulary& vocab, const model::ModelConfig& model_config,
                  const TrainConfig& train_config, const EpochCallback& on_epoch = {});

}  // namespace fatality::training
