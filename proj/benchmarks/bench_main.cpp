#include <benchmark/benchmark.h>

#include "fatality/kernels.hpp"
#include "fatality/model.hpp"
#include "fatality/rng.hpp"
#include "fatality/tokenizer.hpp"

using namespace fatality;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform() - 0.5);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_matrix(n, n, rng);
  const auto b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Encode(benchmark::State& state) {
  const auto vocab = tokenizer::Vocabulary::load(FATALITY_DATA_DIR "/vocab_test.txt");
  const std::string text =
      "On 12 March, Taliban forces killed two NRF fighters in Panjshir district after a "
      "roadside bomb wounded police officers near the Kabul city market.";
  for (auto _ : state) benchmark::DoNotOptimize(tokenizer::encode(text, vocab));
}
BENCHMARK(BM_Encode);

// Inference on a batch of 8 full-width inputs through a 2-layer, 128-wide encoder.
void BM_Forward(benchmark::State& state) {
  model::ModelConfig config;
  config.num_layers = 2, config.hidden = 128, config.heads = 4, config.ffn_dim = 512;
  config.vocab_size = 100;
  const auto params = model::init_params(config, 7);
  const auto seq = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<tokenizer::EncodedInput> batch(8);
  for (auto& e : batch) {
    e.input_word_ids.assign(seq, 0);
    e.input_mask.assign(seq, 1);
    e.input_type_ids.assign(seq, 0);
    for (auto& id : e.input_word_ids) id = static_cast<tokenizer::TokenId>(4 + rng.below(96));
  }
  for (auto _ : state) {
    Rng dropout(0);
    benchmark::DoNotOptimize(model::forward(params, config, batch, false, dropout));
  }
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
