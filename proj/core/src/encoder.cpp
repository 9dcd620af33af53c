// Forward and backward passes of the encoder classifier. Each example is
// processed independently as an [n x H] activation matrix.

#include <cmath>
#include <numeric>

#include "fatality/error.hpp"
#include "fatality/model.hpp"

namespace fatality::model {
namespace {

using namespace kernels;

template <typename T>
BasicTensor<T> slice_cols(const BasicTensor<T>& x, std::size_t begin, std::size_t width) {
  BasicTensor<T> out({x.rows(), width});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto src = x.row(r).subspan(begin, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

template <typename T>
void add_cols(BasicTensor<T>& dst, const BasicTensor<T>& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    auto d = dst.row(r).subspan(begin, src.cols());
    const auto s = src.row(r);
    for (std::size_t j = 0; j < s.size(); ++j) d[j] += s[j];
  }
}

template <typename T>
void add_inplace(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  if (dst.dims() != src.dims()) {
    throw ShapeError("add: " + dims_to_string(dst.dims()) + " vs " + dims_to_string(src.dims()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  auto y = matmul(x, weight);
  add_row_bias(y, bias);
  return y;
}

// Accumulates weight/bias gradients of y = x W + b and returns dL/dx.
template <typename T>
BasicTensor<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_y, BasicParameterSet<T>& grads,
                               const std::string& prefix) {
  add_inplace(grads.at(prefix + ".weight"), matmul_at(x, grad_y));
  add_inplace(grads.at(prefix + ".bias"), row_bias_backward(grad_y));
  return matmul_bt(grad_y, weight);
}

void check_input(const EncodedInput& in, const ModelConfig& config, std::size_t index) {
  const auto n = in.input_word_ids.size();
  auto fail = [&](const std::string& msg) {
    throw DataError("batch example " + std::to_string(index) + ": " + msg);
  };
  if (n == 0) fail("empty input");
  if (in.input_mask.size() != n || in.input_type_ids.size() != n) {
    fail("input arrays have different lengths");
  }
  if (n > config.max_positions) {
    fail("length " + std::to_string(n) + " exceeds max_positions " +
         std::to_string(config.max_positions));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (in.input_type_ids[i] < 0 || static_cast<std::size_t>(in.input_type_ids[i]) >= kSegmentVocab) {
      fail("type id out of range at position " + std::to_string(i));
    }
    if (in.input_mask[i] != 0 && in.input_mask[i] != 1) fail("mask values must be 0 or 1");
  }
}

template <typename T>
T sigmoid(T x) {
  return x >= 0 ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const BasicParameterSet<T>& params, const ModelConfig& config,
                         std::span<const EncodedInput> batch, bool training, Rng& rng) {
  if (batch.empty()) throw DataError("forward: empty batch");
  const std::size_t hidden = config.hidden, heads = config.heads, dh = config.head_dim();
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));

  ForwardResult<T> result;
  if (training) result.cache.emplace();

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& in = batch[b];
    check_input(in, config, b);
    const std::size_t n = in.length();
    ExampleCache<T> ex;
    ex.ids = in.input_word_ids;
    ex.types = in.input_type_ids;
    ex.mask = in.input_mask;
    std::vector<std::int32_t> positions(n);
    std::iota(positions.begin(), positions.end(), 0);

    auto x = embedding_lookup(params.at("embeddings.word"), ex.ids);
    add_inplace(x, embedding_lookup(params.at("embeddings.position"), positions));
    add_inplace(x, embedding_lookup(params.at("embeddings.segment"), ex.types));
    ex.embedding_ln = layer_norm(x, params.at("embeddings.ln.gamma"), params.at("embeddings.ln.beta"));
    auto emb_drop = dropout(ex.embedding_ln.out, config.encoder_dropout, rng, training);
    ex.embedding_sum = std::move(x);
    ex.embedding_dropout = std::move(emb_drop.scale);
    BasicTensor<T> h = std::move(emb_drop.out);

    // Additive key mask; masked_softmax also forces exact zeros.
    BasicTensor<T> key_bias({1, n});
    for (std::size_t j = 0; j < n; ++j) key_bias[j] = ex.mask[j] ? T{0} : T{kAttentionMaskValue};

    for (std::uint32_t l = 0; l < config.num_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      LayerCache<T> lc;
      lc.q = linear(h, params.at(p + "attention.query.weight"), params.at(p + "attention.query.bias"));
      lc.k = linear(h, params.at(p + "attention.key.weight"), params.at(p + "attention.key.bias"));
      lc.v = linear(h, params.at(p + "attention.value.weight"), params.at(p + "attention.value.bias"));
      lc.context = BasicTensor<T>({n, hidden});
      for (std::size_t a = 0; a < heads; ++a) {
        const auto qh = slice_cols(lc.q, a * dh, dh);
        const auto kh = slice_cols(lc.k, a * dh, dh);
        const auto vh = slice_cols(lc.v, a * dh, dh);
        auto scores = matmul_bt(qh, kh);
        for (std::size_t r = 0; r < n; ++r) {
          auto row = scores.row(r);
          for (std::size_t j = 0; j < n; ++j) row[j] = row[j] * scale + key_bias[j];
        }
        auto probs = masked_softmax(scores, ex.mask);
        add_cols(lc.context, matmul(probs, vh), a * dh);
        lc.probs.push_back(std::move(probs));
      }
      auto attn = linear(lc.context, params.at(p + "attention.output.weight"),
                         params.at(p + "attention.output.bias"));
      auto attn_drop = dropout(attn, config.encoder_dropout, rng, training);
      lc.attn_dropout = std::move(attn_drop.scale);
      lc.ln1_input = h;
      add_inplace(lc.ln1_input, attn_drop.out);
      lc.ln1 = layer_norm(lc.ln1_input, params.at(p + "attention.ln.gamma"),
                          params.at(p + "attention.ln.beta"));
      const auto& h1 = lc.ln1.out;

      lc.ffn_pre = linear(h1, params.at(p + "ffn.in.weight"), params.at(p + "ffn.in.bias"));
      lc.ffn_act = gelu(lc.ffn_pre, config.gelu);
      auto ffn_out = linear(lc.ffn_act, params.at(p + "ffn.out.weight"), params.at(p + "ffn.out.bias"));
      auto ffn_drop = dropout(ffn_out, config.encoder_dropout, rng, training);
      lc.ffn_dropout = std::move(ffn_drop.scale);
      lc.ln2_input = h1;
      add_inplace(lc.ln2_input, ffn_drop.out);
      lc.ln2 = layer_norm(lc.ln2_input, params.at(p + "ffn.ln.gamma"), params.at(p + "ffn.ln.beta"));

      lc.input = std::move(h);
      h = lc.ln2.out;
      ex.layers.push_back(std::move(lc));
    }

    ex.cls = BasicTensor<T>({1, hidden}, std::vector<T>(h.row(0).begin(), h.row(0).end()));
    ex.pooled = kernels::tanh(linear(ex.cls, params.at("pooler.weight"), params.at("pooler.bias")));
    auto head_drop = dropout(ex.pooled, config.head_dropout, rng, training);
    ex.head_dropout = std::move(head_drop.scale);
    ex.head_input = std::move(head_drop.out);
    const auto logit = linear(ex.head_input, params.at("classifier.weight"),
                              params.at("classifier.bias"))[0];
    result.logits.push_back(logit);
    result.probabilities.push_back(sigmoid(logit));
    if (training) result.cache->examples.push_back(std::move(ex));
  }
  return result;
}

template <typename T>
BasicParameterSet<T> backward(const BasicParameterSet<T>& params, const ModelConfig& config,
                              const std::optional<ForwardCache<T>>& cache,
                              std::span<const T> grad_logits) {
  if (!cache) throw Error("backward requires the cache of a training-mode forward pass");
  if (grad_logits.size() != cache->examples.size()) {
    throw ShapeError("backward: " + std::to_string(grad_logits.size()) +
                     " logit gradients for a batch of " + std::to_string(cache->examples.size()));
  }
  const std::size_t hidden = config.hidden, heads = config.heads, dh = config.head_dim();
  const T scale = T{1} / std::sqrt(static_cast<T>(dh));
  auto grads = params.zeros_like();

  for (std::size_t b = 0; b < cache->examples.size(); ++b) {
    const auto& ex = cache->examples[b];
    const std::size_t n = ex.ids.size();
    const BasicTensor<T> grad_logit({1, 1}, {grad_logits[b]});

    auto d_head = linear_backward(ex.head_input, params.at("classifier.weight"), grad_logit, grads,
                                  "classifier");
    auto d_pooled = tanh_backward(ex.pooled, dropout_backward<T>(ex.head_dropout, d_head));
    auto d_cls = linear_backward(ex.cls, params.at("pooler.weight"), d_pooled, grads, "pooler");

    BasicTensor<T> dh_out({n, hidden});
    std::copy(d_cls.values().begin(), d_cls.values().end(), dh_out.row(0).begin());

    for (std::size_t l = config.num_layers; l-- > 0;) {
      const auto& lc = ex.layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";

      auto ln2 = layer_norm_backward(lc.ln2_input, params.at(p + "ffn.ln.gamma"), lc.ln2, dh_out);
      add_inplace(grads.at(p + "ffn.ln.gamma"), ln2.gamma);
      add_inplace(grads.at(p + "ffn.ln.beta"), ln2.beta);
      auto d_h1 = ln2.x;
      const auto d_ffn_out = dropout_backward<T>(lc.ffn_dropout, ln2.x);
      const auto d_act = linear_backward(lc.ffn_act, params.at(p + "ffn.out.weight"), d_ffn_out,
                                         grads, p + "ffn.out");
      const auto d_pre = gelu_backward(lc.ffn_pre, d_act, config.gelu);
      add_inplace(d_h1, linear_backward(lc.ln1.out, params.at(p + "ffn.in.weight"), d_pre, grads,
                                        p + "ffn.in"));

      auto ln1 = layer_norm_backward(lc.ln1_input, params.at(p + "attention.ln.gamma"), lc.ln1, d_h1);
      add_inplace(grads.at(p + "attention.ln.gamma"), ln1.gamma);
      add_inplace(grads.at(p + "attention.ln.beta"), ln1.beta);
      auto d_input = ln1.x;
      const auto d_attn = dropout_backward<T>(lc.attn_dropout, ln1.x);
      const auto d_context = linear_backward(lc.context, params.at(p + "attention.output.weight"),
                                             d_attn, grads, p + "attention.output");

      BasicTensor<T> dq({n, hidden}), dk({n, hidden}), dv({n, hidden});
      for (std::size_t a = 0; a < heads; ++a) {
        const auto qh = slice_cols(lc.q, a * dh, dh);
        const auto kh = slice_cols(lc.k, a * dh, dh);
        const auto vh = slice_cols(lc.v, a * dh, dh);
        const auto d_ctx_h = slice_cols(d_context, a * dh, dh);
        const auto& probs = lc.probs[a];
        const auto d_probs = matmul_bt(d_ctx_h, vh);
        add_cols(dv, matmul_at(probs, d_ctx_h), a * dh);
        auto d_scores = masked_softmax_backward(probs, d_probs, ex.mask);
        for (auto& v : d_scores.values()) v *= scale;
        add_cols(dq, matmul(d_scores, kh), a * dh);
        add_cols(dk, matmul_at(d_scores, qh), a * dh);
      }
      add_inplace(d_input, linear_backward(lc.input, params.at(p + "attention.query.weight"), dq,
                                           grads, p + "attention.query"));
      add_inplace(d_input, linear_backward(lc.input, params.at(p + "attention.key.weight"), dk,
                                           grads, p + "attention.key"));
      add_inplace(d_input, linear_backward(lc.input, params.at(p + "attention.value.weight"), dv,
                                           grads, p + "attention.value"));
      dh_out = std::move(d_input);
    }

    const auto d_ln = dropout_backward<T>(ex.embedding_dropout, dh_out);
    auto emb = layer_norm_backward(ex.embedding_sum, params.at("embeddings.ln.gamma"),
                                   ex.embedding_ln, d_ln);
    add_inplace(grads.at("embeddings.ln.gamma"), emb.gamma);
    add_inplace(grads.at("embeddings.ln.beta"), emb.beta);
    std::vector<std::int32_t> positions(n);
    std::iota(positions.begin(), positions.end(), 0);
    embedding_backward(grads.at("embeddings.word"), ex.ids, emb.x);
    embedding_backward(grads.at("embeddings.position"), positions, emb.x);
    embedding_backward(grads.at("embeddings.segment"), ex.types, emb.x);
  }
  return grads;
}

template ForwardResult<float> forward(const BasicParameterSet<float>&, const ModelConfig&,
                                      std::span<const EncodedInput>, bool, Rng&);
template ForwardResult<double> forward(const BasicParameterSet<double>&, const ModelConfig&,
                                       std::span<const EncodedInput>, bool, Rng&);
template BasicParameterSet<float> backward(const BasicParameterSet<float>&, const ModelConfig&,
                                           const std::optional<ForwardCache<float>>&,
                                           std::span<const float>);
template BasicParameterSet<double> backward(const BasicParameterSet<double>&, const ModelConfig&,
                                            const std::optional<ForwardCache<double>>&,
                                            std::span<const double>);

}  // namespace fatality::model
