#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace dlsvm {

// Dense n-dimensional array, row-major contiguous. float for training,
// double for gradient checking (same code path, templated scalar).
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<size_t> shape, T fill = T(0))
      : shape_(std::move(shape)), data_(count(shape_), fill) {}

  static TensorT from_data(std::vector<size_t> shape, std::vector<T> data) {
    if (count(shape) != data.size())
      throw_dimension("tensor data length " + std::to_string(data.size()) +
                      " does not match shape " + shape_string(shape));
    TensorT t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    return t;
  }

  const std::vector<size_t>& shape() const { return shape_; }
  size_t rank() const { return shape_.size(); }
  size_t size() const { return data_.size(); }
  size_t dim(size_t i) const { return shape_[i]; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  T& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
  const T& at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  // Queryable NaN/Inf check used by the training loop.
  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

  TensorT reshaped(std::vector<size_t> shape) const {
    if (count(shape) != size())
      throw_dimension("reshape from " + shape_string(shape_) + " to " +
                      shape_string(shape) + " changes element count");
    TensorT t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename U>
  TensorT<U> cast() const {
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = U(data_[i]);
    return TensorT<U>::from_data(shape_, std::move(d));
  }

  static size_t count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  static std::string shape_string(const std::vector<size_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  std::string shape_str() const { return shape_string(shape_); }

 private:
  std::vector<size_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

// ---------------------------------------------------------------------------
// Matrix kernels. Per output element the reduction always runs k-ascending,
// so results are bit-reproducible regardless of loop blocking.

template <typename T>
void check_matrix(const TensorT<T>& a, const char* who) {
  if (a.rank() != 2) throw_dimension(std::string(who) + ": expected a matrix, got " + a.shape_str());
}

// c = a * b
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  check_matrix(a, "matmul");
  check_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw_dimension("matmul: inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
  const size_t p = a.dim(0), m = a.dim(1), n = b.dim(1);
  TensorT<T> c({p, n}, T(0));
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (size_t i = 0; i < p; ++i) {
    for (size_t k = 0; k < m; ++k) {
      const T aik = pa[i * m + k];
      const T* brow = pb + k * n;
      T* crow = pc + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// c = a * b^T
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
  check_matrix(a, "matmul_nt");
  check_matrix(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw_dimension("matmul_nt: inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str() + "^T");
  const size_t p = a.dim(0), m = a.dim(1), n = b.dim(0);
  TensorT<T> c({p, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (size_t i = 0; i < p; ++i) {
    const T* arow = pa + i * m;
    for (size_t j = 0; j < n; ++j) {
      const T* brow = pb + j * m;
      T acc = T(0);
      for (size_t k = 0; k < m; ++k) acc += arow[k] * brow[k];
      pc[i * n + j] = acc;
    }
  }
  return c;
}

// c += a^T * b (accumulating form, used for weight gradients)
template <typename T>
void matmul_tn_acc(const TensorT<T>& a, const TensorT<T>& b, TensorT<T>& c) {
  check_matrix(a, "matmul_tn");
  check_matrix(b, "matmul_tn");
  if (a.dim(0) != b.dim(0))
    throw_dimension("matmul_tn: inner dimensions disagree: " + a.shape_str() + "^T x " + b.shape_str());
  const size_t m = a.dim(0), p = a.dim(1), n = b.dim(1);
  if (c.rank() != 2 || c.dim(0) != p || c.dim(1) != n)
    throw_dimension("matmul_tn: output shape " + c.shape_str() + " does not match [" +
                    std::to_string(p) + "x" + std::to_string(n) + "]");
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  for (size_t k = 0; k < m; ++k) {
    const T* arow = pa + k * p;
    const T* brow = pb + k * n;
    for (size_t i = 0; i < p; ++i) {
      const T aki = arow[i];
      if (aki == T(0)) continue;
      T* crow = pc + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
}

template <typename T>
TensorT<T> matmul_tn(const TensorT<T>& a, const TensorT<T>& b) {
  TensorT<T> c({a.dim(1), b.dim(1)}, T(0));
  matmul_tn_acc(a, b, c);
  return c;
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
  check_matrix(a, "transpose");
  const size_t r = a.dim(0), c = a.dim(1);
  TensorT<T> t({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

// Column sums of a matrix, accumulated into `out` (length = cols).
template <typename T>
void column_sum_acc(const TensorT<T>& a, TensorT<T>& out) {
  check_matrix(a, "column_sum");
  if (out.size() != a.dim(1))
    throw_dimension("column_sum: output length " + std::to_string(out.size()) +
                    " does not match columns of " + a.shape_str());
  const size_t r = a.dim(0), c = a.dim(1);
  for (size_t i = 0; i < r; ++i) {
    const T* row = a.data() + i * c;
    for (size_t j = 0; j < c; ++j) out[j] += row[j];
  }
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation, no kernel flip) and max pooling.
// Layout: images are {h,w,c} or batched {n,h,w,c}; kernels {k,k,cin,cout}.

enum class Padding { Same, Valid };

struct ConvGeometry {
  size_t out_h = 0, out_w = 0;
  ptrdiff_t pad_top = 0, pad_left = 0;
};

inline ConvGeometry conv_geometry(size_t h, size_t w, size_t k, size_t stride, Padding pad) {
  if (stride < 1) throw_input("conv2d: stride must be >= 1");
  ConvGeometry g;
  if (pad == Padding::Same) {
    g.out_h = (h + stride - 1) / stride;
    g.out_w = (w + stride - 1) / stride;
    size_t need_h = (g.out_h - 1) * stride + k;
    size_t need_w = (g.out_w - 1) * stride + k;
    g.pad_top = need_h > h ? ptrdiff_t((need_h - h) / 2) : 0;
    g.pad_left = need_w > w ? ptrdiff_t((need_w - w) / 2) : 0;
  } else {
    if (k > h || k > w)
      throw_dimension("conv2d: kernel " + std::to_string(k) + "x" + std::to_string(k) +
                      " exceeds input " + std::to_string(h) + "x" + std::to_string(w));
    g.out_h = (h - k) / stride + 1;
    g.out_w = (w - k) / stride + 1;
  }
  return g;
}

// Patch matrix for one sample: rows = out_h*out_w, cols = k*k*cin.
// Out-of-bounds taps read as zero padding.
template <typename T>
void im2col(const T* img, size_t h, size_t w, size_t c, size_t k, size_t stride,
            const ConvGeometry& g, T* cols) {
  const size_t patch = k * k * c;
  for (size_t oy = 0; oy < g.out_h; ++oy) {
    for (size_t ox = 0; ox < g.out_w; ++ox) {
      T* dst = cols + (oy * g.out_w + ox) * patch;
      for (size_t ky = 0; ky < k; ++ky) {
        ptrdiff_t iy = ptrdiff_t(oy * stride + ky) - g.pad_top;
        for (size_t kx = 0; kx < k; ++kx) {
          ptrdiff_t ix = ptrdiff_t(ox * stride + kx) - g.pad_left;
          T* cell = dst + (ky * k + kx) * c;
          if (iy < 0 || iy >= ptrdiff_t(h) || ix < 0 || ix >= ptrdiff_t(w)) {
            for (size_t ci = 0; ci < c; ++ci) cell[ci] = T(0);
          } else {
            const T* src = img + (size_t(iy) * w + size_t(ix)) * c;
            for (size_t ci = 0; ci < c; ++ci) cell[ci] = src[ci];
          }
        }
      }
    }
  }
}

// Scatter-add of a patch matrix back onto the input image.
template <typename T>
void col2im_acc(const T* cols, size_t h, size_t w, size_t c, size_t k, size_t stride,
                const ConvGeometry& g, T* img) {
  const size_t patch = k * k * c;
  for (size_t oy = 0; oy < g.out_h; ++oy) {
    for (size_t ox = 0; ox < g.out_w; ++ox) {
      const T* src = cols + (oy * g.out_w + ox) * patch;
      for (size_t ky = 0; ky < k; ++ky) {
        ptrdiff_t iy = ptrdiff_t(oy * stride + ky) - g.pad_top;
        if (iy < 0 || iy >= ptrdiff_t(h)) continue;
        for (size_t kx = 0; kx < k; ++kx) {
          ptrdiff_t ix = ptrdiff_t(ox * stride + kx) - g.pad_left;
          if (ix < 0 || ix >= ptrdiff_t(w)) continue;
          const T* cell = src + (ky * k + kx) * c;
          T* dst = img + (size_t(iy) * w + size_t(ix)) * c;
          for (size_t ci = 0; ci < c; ++ci) dst[ci] += cell[ci];
        }
      }
    }
  }
}

namespace detail {
// Accepts {h,w,c} or {n,h,w,c}; returns dims with n=1 for the former.
template <typename T>
void conv_input_dims(const TensorT<T>& input, size_t& n, size_t& h, size_t& w, size_t& c) {
  if (input.rank() == 3) {
    n = 1;
    h = input.dim(0);
    w = input.dim(1);
    c = input.dim(2);
  } else if (input.rank() == 4) {
    n = input.dim(0);
    h = input.dim(1);
    w = input.dim(2);
    c = input.dim(3);
  } else {
    throw_dimension("conv2d: input must be {h,w,c} or {n,h,w,c}, got " + input.shape_str());
  }
}
}  // namespace detail

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& kernels, const TensorT<T>* bias,
                  size_t stride, Padding pad) {
  size_t n, h, w, cin;
  detail::conv_input_dims(input, n, h, w, cin);
  if (kernels.rank() != 4 || kernels.dim(0) != kernels.dim(1))
    throw_dimension("conv2d: kernels must be {k,k,cin,cout}, got " + kernels.shape_str());
  if (kernels.dim(2) != cin)
    throw_dimension("conv2d: kernel channels " + kernels.shape_str() + " do not match input " +
                    input.shape_str());
  const size_t k = kernels.dim(0), cout = kernels.dim(3);
  if (bias && bias->size() != cout)
    throw_dimension("conv2d: bias length " + std::to_string(bias->size()) + " != cout " +
                    std::to_string(cout));
  ConvGeometry g = conv_geometry(h, w, k, stride, pad);

  const size_t patch = k * k * cin;
  const size_t rows = g.out_h * g.out_w;
  TensorT<T> cols({rows, patch});
  // kernel tensor {k,k,cin,cout} is already the row-major [patch x cout] matrix
  TensorT<T> kmat = kernels.reshaped({patch, cout});
  std::vector<size_t> out_shape = input.rank() == 3
                                      ? std::vector<size_t>{g.out_h, g.out_w, cout}
                                      : std::vector<size_t>{n, g.out_h, g.out_w, cout};
  TensorT<T> out(out_shape);
  const size_t in_stride = h * w * cin;
  const size_t out_stride = rows * cout;
  for (size_t s = 0; s < n; ++s) {
    im2col(input.data() + s * in_stride, h, w, cin, k, stride, g, cols.data());
    TensorT<T> prod = matmul(cols, kmat);
    T* dst = out.data() + s * out_stride;
    const T* src = prod.data();
    if (bias) {
      const T* pb = bias->data();
      for (size_t r = 0; r < rows; ++r)
        for (size_t j = 0; j < cout; ++j) dst[r * cout + j] = src[r * cout + j] + pb[j];
    } else {
      std::copy(src, src + out_stride, dst);
    }
  }
  return out;
}

template <typename T>
struct ConvGrads {
  TensorT<T> input_grad;
  TensorT<T> kernel_grad;
  TensorT<T> bias_grad;
};

// Exact gradients of conv2d wrt input, kernels and bias. The cache is the
// forward input plus the call geometry.
template <typename T>
ConvGrads<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& kernels, size_t stride,
                             Padding pad, const TensorT<T>& upstream) {
  size_t n, h, w, cin;
  detail::conv_input_dims(input, n, h, w, cin);
  const size_t k = kernels.dim(0), cout = kernels.dim(3);
  ConvGeometry g = conv_geometry(h, w, k, stride, pad);
  size_t un, uh, uw, uc;
  detail::conv_input_dims(upstream, un, uh, uw, uc);
  if (un != n || uh != g.out_h || uw != g.out_w || uc != cout)
    throw_dimension("conv2d_backward: upstream shape " + upstream.shape_str() +
                    " does not match forward output");

  const size_t patch = k * k * cin;
  const size_t rows = g.out_h * g.out_w;
  TensorT<T> kmat = kernels.reshaped({patch, cout});
  ConvGrads<T> grads;
  grads.input_grad = TensorT<T>(input.shape(), T(0));
  grads.kernel_grad = TensorT<T>(kernels.shape(), T(0));
  grads.bias_grad = TensorT<T>({cout}, T(0));
  TensorT<T> kgrad_mat({patch, cout}, T(0));
  TensorT<T> cols({rows, patch});
  const size_t in_stride = h * w * cin;
  const size_t out_stride = rows * cout;
  for (size_t s = 0; s < n; ++s) {
    TensorT<T> up = TensorT<T>::from_data(
        {rows, cout}, std::vector<T>(upstream.data() + s * out_stride,
                                     upstream.data() + (s + 1) * out_stride));
    im2col(input.data() + s * in_stride, h, w, cin, k, stride, g, cols.data());
    matmul_tn_acc(cols, up, kgrad_mat);      // dK += cols^T * up
    column_sum_acc(up, grads.bias_grad);     // db += colsum(up)
    TensorT<T> dcols = matmul_nt(up, kmat);  // dcols = up * K^T
    col2im_acc(dcols.data(), h, w, cin, k, stride, g, grads.input_grad.data() + s * in_stride);
  }
  std::copy(kgrad_mat.data(), kgrad_mat.data() + kgrad_mat.size(), grads.kernel_grad.data());
  return grads;
}

template <typename T>
struct PoolResult {
  TensorT<T> output;
  // For each output cell, the flat index (within its own sample block) of
  // the winning input element; first index wins ties.
  std::vector<uint32_t> argmax;
};

template <typename T>
PoolResult<T> maxpool2d(const TensorT<T>& input, size_t window, size_t stride) {
  size_t n, h, w, c;
  detail::conv_input_dims(input, n, h, w, c);
  if (stride < 1) throw_input("maxpool2d: stride must be >= 1");
  if (window > h || window > w)
    throw_dimension("maxpool2d: window " + std::to_string(window) + " exceeds input " +
                    std::to_string(h) + "x" + std::to_string(w));
  const size_t oh = (h - window) / stride + 1;
  const size_t ow = (w - window) / stride + 1;
  std::vector<size_t> out_shape = input.rank() == 3 ? std::vector<size_t>{oh, ow, c}
                                                    : std::vector<size_t>{n, oh, ow, c};
  PoolResult<T> res;
  res.output = TensorT<T>(out_shape);
  res.argmax.resize(n * oh * ow * c);
  const size_t in_stride = h * w * c;
  for (size_t s = 0; s < n; ++s) {
    const T* img = input.data() + s * in_stride;
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        for (size_t ci = 0; ci < c; ++ci) {
          T best = -std::numeric_limits<T>::infinity();
          uint32_t best_idx = 0;
          for (size_t ky = 0; ky < window; ++ky) {
            for (size_t kx = 0; kx < window; ++kx) {
              size_t iy = oy * stride + ky, ix = ox * stride + kx;
              size_t idx = (iy * w + ix) * c + ci;
              if (img[idx] > best) {
                best = img[idx];
                best_idx = uint32_t(idx);
              }
            }
          }
          size_t out_idx = ((s * oh + oy) * ow + ox) * c + ci;
          res.output[out_idx] = best;
          res.argmax[out_idx] = best_idx;
        }
      }
    }
  }
  return res;
}

// Routes the upstream gradient to the recorded argmax positions
// (accumulating, since stride < window makes windows overlap).
template <typename T>
TensorT<T> maxpool2d_backward(const std::vector<size_t>& input_shape,
                              const std::vector<uint32_t>& argmax, const TensorT<T>& upstream) {
  if (argmax.size() != upstream.size())
    throw_dimension("maxpool2d_backward: argmax count " + std::to_string(argmax.size()) +
                    " != upstream size " + std::to_string(upstream.size()));
  TensorT<T> grad(input_shape, T(0));
  size_t n = input_shape.size() == 4 ? input_shape[0] : 1;
  size_t in_stride = grad.size() / n;
  size_t out_stride = upstream.size() / n;
  for (size_t s = 0; s < n; ++s) {
    T* dst = grad.data() + s * in_stride;
    for (size_t i = 0; i < out_stride; ++i) {
      size_t oi = s * out_stride + i;
      dst[argmax[oi]] += upstream[oi];
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Elementwise activations.

template <typename T>
inline T leaky_relu_scalar(T x) {
  return x > T(0) ? x : T(0.01) * x;
}

// Subgradient at exactly 0 is taken as 1 (the max-branch choice).
template <typename T>
inline T leaky_relu_grad_scalar(T x) {
  return x >= T(0) ? T(1) : T(0.01);
}

template <typename T>
inline T sigmoid_scalar(T x) {
  // split on sign so exp never overflows
  if (x >= T(0)) {
    T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.vec()) v = leaky_relu_scalar(v);
  return y;
}

template <typename T>
TensorT<T> leaky_relu_grad(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.vec()) v = leaky_relu_grad_scalar(v);
  return y;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.vec()) v = sigmoid_scalar(v);
  return y;
}

template <typename T>
TensorT<T> tanh_t(const TensorT<T>& x) {
  TensorT<T> y = x;
  for (auto& v : y.vec()) v = std::tanh(v);
  return y;
}

}  // namespace dlsvm
