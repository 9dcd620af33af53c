#include "fatality/training.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>

#include "fatality/error.hpp"

namespace fatality::training {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw DataError("invalid training config: " + msg); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch size must be at least 1");
  if (!(base_lr > 0.0)) fail("learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) fail("warmup fraction outside [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) fail("gradient clip norm must be positive");
}

namespace {

template <typename P>
LossResult bce_impl(std::span<const P> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) {
    throw DataError("bce_loss: " + std::to_string(probabilities.size()) + " probabilities vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (probabilities.empty()) throw DataError("bce_loss: empty batch");
  const auto n = static_cast<double>(probabilities.size());
  LossResult r;
  r.grad_logits.reserve(probabilities.size());
  double total = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = static_cast<double>(probabilities[i]);
    const double y = labels[i];
    const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    r.grad_logits.push_back((p - y) / n);
  }
  r.loss = -total / n;
  return r;
}

}  // namespace

LossResult bce_loss(std::span<const double> probabilities, std::span<const int> labels) {
  return bce_impl(probabilities, labels);
}

LossResult bce_loss(std::span<const float> probabilities, std::span<const int> labels) {
  return bce_impl(probabilities, labels);
}

std::uint64_t warmup_steps(std::uint64_t total_steps, const TrainConfig& config) {
  if (config.warmup_fraction <= 0.0) return 0;
  const auto w = static_cast<std::uint64_t>(
      std::llround(config.warmup_fraction * static_cast<double>(total_steps)));
  return std::max<std::uint64_t>(w, 1);
}

double lr_at(std::uint64_t step, std::uint64_t total_steps, const TrainConfig& config) {
  if (total_steps == 0 || step >= total_steps) {
    throw DataError("lr_at: step " + std::to_string(step) + " outside [0, " +
                    std::to_string(total_steps) + ")");
  }
  const auto warmup = warmup_steps(total_steps, config);
  if (step < warmup) {
    return config.base_lr * (static_cast<double>(step + 1) / static_cast<double>(warmup));
  }
  return config.base_lr *
         (static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup));
}

template <typename T>
void adamw_step(model::BasicParameterSet<T>& params, const model::BasicParameterSet<T>& grads,
                BasicOptimizerState<T>& state, double lr, const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adamw_step: parameter, gradient, and state sets differ in size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.name(i) != params.name(i) || grads.tensor(i).dims() != params.tensor(i).dims() ||
        state.m.tensor(i).dims() != params.tensor(i).dims() ||
        state.v.tensor(i).dims() != params.tensor(i).dims()) {
      throw ShapeError("adamw_step: mismatch at parameter " + params.name(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
  const T rate = static_cast<T>(lr);
  const T eps = static_cast<T>(config.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (config.freeze_encoder && model::is_encoder_parameter(name)) continue;
    const T decay = model::applies_weight_decay(name)
                        ? static_cast<T>(1.0 - lr * config.weight_decay)
                        : T{1};
    auto theta = params.tensor(i).values();
    const auto g = grads.tensor(i).values();
    auto m = state.m.tensor(i).values();
    auto v = state.v.tensor(i).values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      theta[j] = theta[j] * decay - rate * (m_hat / (std::sqrt(v_hat) + eps));
    }
  }
}

template <typename T>
double clip_global_norm(model::BasicParameterSet<T>& grads, double max_norm) {
  double sum = 0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    for (const T g : grads.tensor(i).values()) sum += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sum);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (std::size_t i = 0; i < grads.size(); ++i) {
      for (auto& g : grads.tensor(i).values()) g *= factor;
    }
  }
  return norm;
}

template void adamw_step(model::BasicParameterSet<float>&, const model::BasicParameterSet<float>&,
                         BasicOptimizerState<float>&, double, const TrainConfig&);
template void adamw_step(model::BasicParameterSet<double>&,
                         const model::BasicParameterSet<double>&, BasicOptimizerState<double>&,
                         double, const TrainConfig&);
template double clip_global_norm(model::BasicParameterSet<float>&, double);
template double clip_global_norm(model::BasicParameterSet<double>&, double);

std::string format_log_line(const EpochLog& e) {
  auto metric = [](const metrics::Metric& m) {
    return m ? nlohmann::ordered_json(*m) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["train_loss"] = e.train_loss;
  j["val_accuracy"] = metric(e.validation.accuracy);
  j["val_precision"] = metric(e.validation.precision);
  j["val_recall"] = metric(e.validation.recall);
  j["val_f1"] = metric(e.validation.f1);
  return j.dump();
}

std::vector<tokenizer::EncodedInput> encode_all(const std::vector<corpus::LabeledExample>& examples,
                                                const tokenizer::Vocabulary& vocab,
                                                std::size_t max_len) {
  std::vector<tokenizer::EncodedInput> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(tokenizer::encode(e.text, vocab, max_len));
  return out;
}

metrics::EvaluationReport evaluate(const model::ParameterSet& params,
                                   const model::ModelConfig& config,
                                   std::span<const tokenizer::EncodedInput> inputs,
                                   std::span<const int> labels, double threshold) {
  if (inputs.empty()) return {};
  const auto predicted = model::classify(params, config, inputs, threshold);
  return metrics::evaluate(metrics::confusion(predicted, labels));
}

namespace {

std::vector<int> labels_of(const std::vector<corpus::LabeledExample>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.label);
  return out;
}

}  // namespace

TrainResult train(model::ParameterSet params, const corpus::DatasetSplit& splits,
                  const tokenizer::Vocabulary& vocab, const model::ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  model_config.validate();
  config.validate();
  if (splits.train.empty()) throw DataError("training split is empty");
  if (vocab.size() != model_config.vocab_size) {
    throw DataError("vocabulary has " + std::to_string(vocab.size()) +
                    " tokens but the model expects " + std::to_string(model_config.vocab_size));
  }
  model::validate_parameters(params, model_config);

  const auto train_inputs = encode_all(splits.train, vocab, model_config.max_seq);
  const auto train_labels = labels_of(splits.train);
  const auto val_inputs = encode_all(splits.validation, vocab, model_config.max_seq);
  const auto val_labels = labels_of(splits.validation);

  const std::size_t n = train_inputs.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;

  TrainResult result;
  result.total_steps = static_cast<std::uint64_t>(config.epochs) * steps_per_epoch;
  Rng shuffle_rng(config.seed, Stream::kShuffle);
  Rng dropout_rng(config.seed, Stream::kDropout);
  auto state = OptimizerState::zeros_like(params);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best_f1 = -std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  std::vector<tokenizer::EncodedInput> batch;
  std::vector<int> batch_labels;
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double loss_sum = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_inputs[order[i]]);
        batch_labels.push_back(train_labels[order[i]]);
      }
      auto fwd = model::forward(params, model_config, batch, /*training=*/true, dropout_rng);
      const auto loss = bce_loss(std::span<const float>(fwd.probabilities), batch_labels);
      if (!std::isfinite(loss.loss)) {
        throw NumericalError("non-finite training loss at step " + std::to_string(step),
                             static_cast<long>(step));
      }
      const std::vector<float> grad_logits(loss.grad_logits.begin(), loss.grad_logits.end());
      auto grads = model::backward(params, model_config, fwd.cache, std::span<const float>(grad_logits));
      if (config.grad_clip_norm) {
        const double norm = clip_global_norm(grads, *config.grad_clip_norm);
        if (!std::isfinite(norm)) {
          throw NumericalError("non-finite gradient norm at step " + std::to_string(step),
                               static_cast<long>(step));
        }
      }
      adamw_step(params, grads, state, lr_at(step, result.total_steps, config), config);
      result.step_losses.push_back(loss.loss);
      loss_sum += loss.loss * static_cast<double>(end - start);
      ++step;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(n);
    entry.validation = evaluate(params, model_config, val_inputs, val_labels);
    const double f1 = entry.validation.f1.value_or(-1.0);
    if (f1 > best_f1) {
      best_f1 = f1;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.final_params = std::move(params);
  return result;
}

}  // namespace fatality::training
