#pragma once

// Forward and backward passes for the dense primitives the encoder is built
// from. Every kernel is instantiated for float (training, inference) and
// double (gradient checking).

#include <cstdint>
#include <span>
#include <vector>

#include "fatality/rng.hpp"
#include "fatality/tensor.hpp"

namespace fatality::kernels {

using MaskView = std::span<const std::int32_t>;
using IdView = std::span<const std::int32_t>;

// c = a * b for a [m x k], b [k x n].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

// a * b^T for a [m x k], b [n x k].
template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b);

// a^T * b for a [k x m], b [k x n].
template <typename T>
BasicTensor<T> matmul_at(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct MatmulGrad {
  BasicTensor<T> a;
  BasicTensor<T> b;
};

// grad_a = grad_c * b^T, grad_b = a^T * grad_c.
template <typename T>
MatmulGrad<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& grad_c);

// Adds bias [n] to every row of x [m x n] in place.
template <typename T>
void add_row_bias(BasicTensor<T>& x, const BasicTensor<T>& bias);

// Column sums of grad [m x n]: the gradient of a broadcast row bias.
template <typename T>
BasicTensor<T> row_bias_backward(const BasicTensor<T>& grad);

// Row-wise softmax over positions where mask is 1. Masked positions are
// exactly zero. Throws if the mask has no ones.
template <typename T>
BasicTensor<T> masked_softmax(const BasicTensor<T>& scores, MaskView mask);

// Softmax Jacobian applied per row: dx = y * (dy - <dy, y>), restricted to
// unmasked positions. Masked positions get exactly zero.
template <typename T>
BasicTensor<T> masked_softmax_backward(const BasicTensor<T>& probs,
                                       const BasicTensor<T>& grad_probs, MaskView mask);

template <typename T>
struct LayerNormResult {
  BasicTensor<T> out;
  std::vector<T> mean;
  std::vector<T> rstd;  // 1 / sqrt(var + eps), per row
};

template <typename T>
struct LayerNormGrad {
  BasicTensor<T> x;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
};

inline constexpr double kLayerNormEps = 1e-12;

// Per-row normalization with population variance, then gamma * xhat + beta.
template <typename T>
LayerNormResult<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                              const BasicTensor<T>& beta, double eps = kLayerNormEps);

template <typename T>
LayerNormGrad<T> layer_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                     const LayerNormResult<T>& forward,
                                     const BasicTensor<T>& grad_out);

enum class GeluMode {
  kErf,   // x * Phi(x), exact
  kTanh,  // 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
};

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x, GeluMode mode = GeluMode::kErf);

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                             GeluMode mode = GeluMode::kErf);

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x);

// Uses the forward output y: dx = dy * (1 - y^2).
template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out);

template <typename T>
struct DropoutResult {
  BasicTensor<T> out;
  // Per-element multiplier: 0 for dropped, 1/(1-rate) for kept. Empty when
  // the call was the identity (inference mode or rate 0).
  std::vector<T> scale;
};

// Inverted dropout. Inference mode and rate 0 are the identity and draw
// nothing from rng.
template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& x, double rate, Rng& rng, bool training);

template <typename T>
BasicTensor<T> dropout_backward(std::span<const T> scale, const BasicTensor<T>& grad_out);

// Gathers rows of table [V x h]. Throws on ids outside [0, V).
template <typename T>
BasicTensor<T> embedding_lookup(const BasicTensor<T>& table, IdView ids);

// Scatter-adds grad_out rows into grad_table; repeated ids accumulate.
template <typename T>
void embedding_backward(BasicTensor<T>& grad_table, IdView ids, const BasicTensor<T>& grad_out);

}  // namespace fatality::kernels
