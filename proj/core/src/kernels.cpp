#include "fatality/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace fatality::kernels {
namespace {

template <typename T>
void require_matrix(const BasicTensor<T>& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + " must be rank 2, got " + dims_to_string(t.dims()));
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

void require_mask(MaskView mask, std::size_t n) {
  require(mask.size() == n, "mask length " + std::to_string(mask.size()) +
                                " does not match score width " + std::to_string(n));
  for (const auto m : mask) {
    if (m != 0) return;
  }
  throw ShapeError("masked_softmax: mask has no unmasked positions");
}

}  // namespace

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul lhs");
  require_matrix(b, "matmul rhs");
  const std::size_t m = a.dims()[0], k = a.dims()[1], n = b.dims()[1];
  require(b.dims()[0] == k, "matmul: inner dimensions differ: " + dims_to_string(a.dims()) +
                                " * " + dims_to_string(b.dims()));
  BasicTensor<T> c({m, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = pc + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const T av = pa[i * k + t];
      const T* brow = pb + t * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_bt lhs");
  require_matrix(b, "matmul_bt rhs");
  const std::size_t m = a.dims()[0], k = a.dims()[1], n = b.dims()[0];
  require(b.dims()[1] == k, "matmul_bt: inner dimensions differ: " + dims_to_string(a.dims()) +
                                " * " + dims_to_string(b.dims()) + "^T");
  BasicTensor<T> c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b.data() + j * k;
      T acc{0};
      for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      c(i, j) = acc;
    }
  }
  return c;
}

template <typename T>
BasicTensor<T> matmul_at(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_matrix(a, "matmul_at lhs");
  require_matrix(b, "matmul_at rhs");
  const std::size_t k = a.dims()[0], m = a.dims()[1], n = b.dims()[1];
  require(b.dims()[0] == k, "matmul_at: inner dimensions differ: " + dims_to_string(a.dims()) +
                                "^T * " + dims_to_string(b.dims()));
  BasicTensor<T> c({m, n});
  T* pc = c.data();
  for (std::size_t t = 0; t < k; ++t) {
    const T* arow = a.data() + t * m;
    const T* brow = b.data() + t * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      T* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

template <typename T>
MatmulGrad<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& grad_c) {
  return {matmul_bt(grad_c, b), matmul_at(a, grad_c)};
}

template <typename T>
void add_row_bias(BasicTensor<T>& x, const BasicTensor<T>& bias) {
  require(bias.size() == x.cols(), "bias length " + std::to_string(bias.size()) +
                                       " does not match width " + std::to_string(x.cols()));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
}

template <typename T>
BasicTensor<T> row_bias_backward(const BasicTensor<T>& grad) {
  BasicTensor<T> out({grad.cols()});
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    const auto row = grad.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
  return out;
}

template <typename T>
BasicTensor<T> masked_softmax(const BasicTensor<T>& scores, MaskView mask) {
  require_matrix(scores, "masked_softmax scores");
  const std::size_t n = scores.cols();
  require_mask(mask, n);
  BasicTensor<T> out(scores.dims());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto s = scores.row(r);
    auto y = out.row(r);
    T max_score = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) max_score = std::max(max_score, s[j]);
    }
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) {
        y[j] = std::exp(s[j] - max_score);
        total += y[j];
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) y[j] /= total;
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> masked_softmax_backward(const BasicTensor<T>& probs,
                                       const BasicTensor<T>& grad_probs, MaskView mask) {
  require(probs.dims() == grad_probs.dims(), "masked_softmax_backward: shape mismatch");
  const std::size_t n = probs.cols();
  require_mask(mask, n);
  BasicTensor<T> out(probs.dims());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const auto y = probs.row(r);
    const auto dy = grad_probs.row(r);
    auto dx = out.row(r);
    T dot{0};
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) dot += dy[j] * y[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j]) dx[j] = y[j] * (dy[j] - dot);
    }
  }
  return out;
}

template <typename T>
LayerNormResult<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                              const BasicTensor<T>& beta, double eps) {
  require_matrix(x, "layer_norm input");
  const std::size_t h = x.cols();
  require(gamma.size() == h && beta.size() == h,
          "layer_norm: gamma/beta length does not match width " + std::to_string(h));
  LayerNormResult<T> res{BasicTensor<T>(x.dims()), std::vector<T>(x.rows()),
                         std::vector<T>(x.rows())};
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    T mean{0};
    for (const T v : row) mean += v;
    mean /= static_cast<T>(h);
    T var{0};
    for (const T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(h);
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(eps));
    res.mean[r] = mean;
    res.rstd[r] = rstd;
    auto out = res.out.row(r);
    for (std::size_t j = 0; j < h; ++j) out[j] = (row[j] - mean) * rstd * gamma[j] + beta[j];
  }
  return res;
}

template <typename T>
LayerNormGrad<T> layer_norm_backward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                     const LayerNormResult<T>& forward,
                                     const BasicTensor<T>& grad_out) {
  require(x.dims() == grad_out.dims(), "layer_norm_backward: shape mismatch");
  const std::size_t h = x.cols();
  LayerNormGrad<T> g{BasicTensor<T>(x.dims()), BasicTensor<T>({h}), BasicTensor<T>({h})};
  std::vector<T> xhat(h), gx(h);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const auto dy = grad_out.row(r);
    const T mean = forward.mean[r];
    const T rstd = forward.rstd[r];
    T sum_g{0}, sum_gx{0};
    for (std::size_t j = 0; j < h; ++j) {
      xhat[j] = (row[j] - mean) * rstd;
      gx[j] = dy[j] * gamma[j];
      sum_g += gx[j];
      sum_gx += gx[j] * xhat[j];
      g.gamma[j] += dy[j] * xhat[j];
      g.beta[j] += dy[j];
    }
    const T inv_h = T{1} / static_cast<T>(h);
    auto dx = g.x.row(r);
    for (std::size_t j = 0; j < h; ++j) {
      dx[j] = rstd * (gx[j] - sum_g * inv_h - xhat[j] * sum_gx * inv_h);
    }
  }
  return g;
}

namespace {

template <typename T>
constexpr T kSqrt2OverPi = static_cast<T>(0.79788456080286535587989211986876);

template <typename T>
T gelu_value(T x, GeluMode mode) {
  if (mode == GeluMode::kErf) {
    return x * T{0.5} * (T{1} + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
  }
  const T inner = kSqrt2OverPi<T> * (x + T{0.044715} * x * x * x);
  return T{0.5} * x * (T{1} + std::tanh(inner));
}

template <typename T>
T gelu_derivative(T x, GeluMode mode) {
  if (mode == GeluMode::kErf) {
    const T cdf = T{0.5} * (T{1} + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
    const T pdf = std::exp(T{-0.5} * x * x) * static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    return cdf + x * pdf;
  }
  const T inner = kSqrt2OverPi<T> * (x + T{0.044715} * x * x * x);
  const T th = std::tanh(inner);
  const T dinner = kSqrt2OverPi<T> * (T{1} + T{3 * 0.044715} * x * x);
  return T{0.5} * (T{1} + th) + T{0.5} * x * (T{1} - th * th) * dinner;
}

}  // namespace

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x, GeluMode mode) {
  BasicTensor<T> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu_value(x[i], mode);
  return out;
}

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& grad_out,
                             GeluMode mode) {
  require(x.dims() == grad_out.dims(), "gelu_backward: shape mismatch");
  BasicTensor<T> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = grad_out[i] * gelu_derivative(x[i], mode);
  return out;
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.dims());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
  return out;
}

template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& y, const BasicTensor<T>& grad_out) {
  require(y.dims() == grad_out.dims(), "tanh_backward: shape mismatch");
  BasicTensor<T> out(y.dims());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = grad_out[i] * (T{1} - y[i] * y[i]);
  return out;
}

template <typename T>
DropoutResult<T> dropout(const BasicTensor<T>& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ShapeError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return {x, {}};
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  DropoutResult<T> res{BasicTensor<T>(x.dims()), std::vector<T>(x.size())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    res.scale[i] = rng.uniform() < rate ? T{0} : keep_scale;
    res.out[i] = x[i] * res.scale[i];
  }
  return res;
}

template <typename T>
BasicTensor<T> dropout_backward(std::span<const T> scale, const BasicTensor<T>& grad_out) {
  if (scale.empty()) return grad_out;
  require(scale.size() == grad_out.size(), "dropout_backward: mask length mismatch");
  BasicTensor<T> out(grad_out.dims());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = grad_out[i] * scale[i];
  return out;
}

template <typename T>
BasicTensor<T> embedding_lookup(const BasicTensor<T>& table, IdView ids) {
  require_matrix(table, "embedding table");
  const std::size_t vocab = table.rows(), h = table.cols();
  BasicTensor<T> out({ids.size(), h});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw ShapeError("embedding id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(vocab) + ")");
    }
    const auto src = table.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
void embedding_backward(BasicTensor<T>& grad_table, IdView ids, const BasicTensor<T>& grad_out) {
  require(grad_out.rows() == ids.size() && grad_out.cols() == grad_table.cols(),
          "embedding_backward: gradient shape " + dims_to_string(grad_out.dims()) +
              " does not match ids/table");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= grad_table.rows()) {
      throw ShapeError("embedding id " + std::to_string(id) + " out of range");
    }
    auto dst = grad_table.row(static_cast<std::size_t>(id));
    const auto src = grad_out.row(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

#define FATALITY_INSTANTIATE_KERNELS(T)                                                     \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);             \
  template BasicTensor<T> matmul_bt(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> matmul_at(const BasicTensor<T>&, const BasicTensor<T>&);          \
  template MatmulGrad<T> matmul_backward(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                         const BasicTensor<T>&);                            \
  template void add_row_bias(BasicTensor<T>&, const BasicTensor<T>&);                       \
  template BasicTensor<T> row_bias_backward(const BasicTensor<T>&);                         \
  template BasicTensor<T> masked_softmax(const BasicTensor<T>&, MaskView);                  \
  template BasicTensor<T> masked_softmax_backward(const BasicTensor<T>&,                    \
                                                  const BasicTensor<T>&, MaskView);         \
  template LayerNormResult<T> layer_norm(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                         const BasicTensor<T>&, double);                    \
  template LayerNormGrad<T> layer_norm_backward(const BasicTensor<T>&, const BasicTensor<T>&, \
                                                const LayerNormResult<T>&,                  \
                                                const BasicTensor<T>&);                     \
  template BasicTensor<T> gelu(const BasicTensor<T>&, GeluMode);                            \
  template BasicTensor<T> gelu_backward(const BasicTensor<T>&, const BasicTensor<T>&,       \
                                        GeluMode);                                          \
  template BasicTensor<T> tanh(const BasicTensor<T>&);                                      \
  template BasicTensor<T> tanh_backward(const BasicTensor<T>&, const BasicTensor<T>&);      \
  template DropoutResult<T> dropout(const BasicTensor<T>&, double, Rng&, bool);             \
  template BasicTensor<T> dropout_backward(std::span<const T>, const BasicTensor<T>&);      \
  template BasicTensor<T> embedding_lookup(const BasicTensor<T>&, IdView);                  \
  template void embedding_backward(BasicTensor<T>&, IdView, const BasicTensor<T>&);

FATALITY_INSTANTIATE_KERNELS(float)
FATALITY_INSTANTIATE_KERNELS(double)

#undef FATALITY_INSTANTIATE_KERNELS

}  // namespace fatality::kernels
