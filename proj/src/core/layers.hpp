#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace dlsvm {

enum class Mode { Train, Infer };

template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value;
  TensorT<T>* grad;
};

// Trainable layer: forward caches whatever backward needs (train mode only),
// backward accumulates parameter gradients and returns the input gradient.
// A layer instance is single-writer; forward/backward/update must be
// externally serialized.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual TensorT<T> forward(const TensorT<T>& x, Mode mode) = 0;
  virtual TensorT<T> backward(const TensorT<T>& upstream) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
  virtual void zero_grads() {}
  // First non-finite thing this layer knows about, or empty. Used for the
  // training-abort diagnostic.
  virtual std::string nonfinite_report() const { return {}; }
};

template <typename T>
class DenseLayer : public Layer<T> {
 public:
  DenseLayer(size_t d_in, size_t d_out)
      : w_({d_in, d_out}), b_({d_out}), dw_({d_in, d_out}), db_({d_out}) {}

  const char* kind() const override { return "dense"; }

  void init(Rng& rng) {
    // Normal(0, sqrt(2/fan_in)) truncated at 2 sigma; biases stay zero.
    double stddev = std::sqrt(2.0 / double(w_.dim(0)));
    for (auto& v : w_.vec()) v = T(rng.truncated_normal(stddev));
  }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    if (x.rank() != 2 || x.dim(1) != w_.dim(0))
      throw_dimension("dense: input " + x.shape_str() + " does not match weights " + w_.shape_str());
    TensorT<T> y = matmul(x, w_);
    const size_t p = y.dim(0), n = y.dim(1);
    for (size_t i = 0; i < p; ++i)
      for (size_t j = 0; j < n; ++j) y[i * n + j] += b_[j];
    if (mode == Mode::Train)
      x_cache_ = x;
    else
      x_cache_ = TensorT<T>();
    return y;
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    matmul_tn_acc(x_cache_, upstream, dw_);  // dW += x^T * up
    column_sum_acc(upstream, db_);           // db += colsum(up)
    return matmul_nt(upstream, w_);          // dx = up * W^T
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".w", &w_, &dw_});
    out.push_back({prefix + ".b", &b_, &db_});
  }

  void zero_grads() override {
    dw_.fill(T(0));
    db_.fill(T(0));
  }

  std::string nonfinite_report() const override {
    if (!w_.all_finite() || !b_.all_finite()) return "parameters";
    if (!x_cache_.empty() && !x_cache_.all_finite()) return "input activations";
    return {};
  }

  TensorT<T>& weights() { return w_; }
  TensorT<T>& bias() { return b_; }

 private:
  TensorT<T> w_, b_, dw_, db_, x_cache_;
};

template <typename T>
class ConvLayer : public Layer<T> {
 public:
  ConvLayer(size_t k, size_t cin, size_t cout, size_t stride, Padding pad)
      : kernels_({k, k, cin, cout}), bias_({cout}), dk_({k, k, cin, cout}), db_({cout}),
        stride_(stride), pad_(pad) {}

  const char* kind() const override { return "conv"; }

  void init(Rng& rng) {
    double fan_in = double(kernels_.dim(0) * kernels_.dim(1) * kernels_.dim(2));
    double stddev = std::sqrt(2.0 / fan_in);
    for (auto& v : kernels_.vec()) v = T(rng.truncated_normal(stddev));
  }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    TensorT<T> y = conv2d(x, kernels_, &bias_, stride_, pad_);
    if (mode == Mode::Train)
      x_cache_ = x;
    else
      x_cache_ = TensorT<T>();
    return y;
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    ConvGrads<T> g = conv2d_backward(x_cache_, kernels_, stride_, pad_, upstream);
    for (size_t i = 0; i < dk_.size(); ++i) dk_[i] += g.kernel_grad[i];
    for (size_t i = 0; i < db_.size(); ++i) db_[i] += g.bias_grad[i];
    return std::move(g.input_grad);
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
    out.push_back({prefix + ".k", &kernels_, &dk_});
    out.push_back({prefix + ".b", &bias_, &db_});
  }

  void zero_grads() override {
    dk_.fill(T(0));
    db_.fill(T(0));
  }

  std::string nonfinite_report() const override {
    if (!kernels_.all_finite() || !bias_.all_finite()) return "parameters";
    if (!x_cache_.empty() && !x_cache_.all_finite()) return "input activations";
    return {};
  }

  TensorT<T>& kernels() { return kernels_; }
  TensorT<T>& bias() { return bias_; }

 private:
  TensorT<T> kernels_, bias_, dk_, db_, x_cache_;
  size_t stride_;
  Padding pad_;
};

template <typename T>
class LeakyReluLayer : public Layer<T> {
 public:
  const char* kind() const override { return "leaky_relu"; }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    TensorT<T> y = leaky_relu(x);
    if (mode == Mode::Train)
      x_cache_ = x;
    else
      x_cache_ = TensorT<T>();
    return y;
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    TensorT<T> g = upstream;
    for (size_t i = 0; i < g.size(); ++i) g[i] *= leaky_relu_grad_scalar(x_cache_[i]);
    return g;
  }

  std::string nonfinite_report() const override {
    if (!x_cache_.empty() && !x_cache_.all_finite()) return "input activations";
    return {};
  }

 private:
  TensorT<T> x_cache_;
};

template <typename T>
class MaxPoolLayer : public Layer<T> {
 public:
  MaxPoolLayer(size_t window, size_t stride) : window_(window), stride_(stride) {}

  const char* kind() const override { return "maxpool"; }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    PoolResult<T> res = maxpool2d(x, window_, stride_);
    if (mode == Mode::Train) {
      in_shape_ = x.shape();
      argmax_ = std::move(res.argmax);
    } else {
      in_shape_.clear();
      argmax_.clear();
    }
    return std::move(res.output);
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    return maxpool2d_backward(in_shape_, argmax_, upstream);
  }

 private:
  size_t window_, stride_;
  std::vector<size_t> in_shape_;
  std::vector<uint32_t> argmax_;
};

// Inverted dropout: kept elements are scaled by 1/keep_prob at train time so
// inference is exactly the identity.
template <typename T>
class DropoutLayer : public Layer<T> {
 public:
  DropoutLayer(double keep_prob, Rng rng) : keep_prob_(keep_prob), rng_(rng) {
    if (!(keep_prob > 0.0) || keep_prob > 1.0)
      throw_config("dropout: keep probability must be in (0,1], got " + std::to_string(keep_prob));
  }

  const char* kind() const override { return "dropout"; }

  TensorT<T> forward(const TensorT<T>& x, Mode mode) override {
    if (mode == Mode::Infer || keep_prob_ == 1.0) {
      mask_ = TensorT<T>();
      if (mode == Mode::Train && keep_prob_ == 1.0) {
        mask_ = TensorT<T>(x.shape(), T(1));
      }
      return x;
    }
    mask_ = TensorT<T>(x.shape());
    TensorT<T> y = x;
    const T scale = T(1.0 / keep_prob_);
    for (size_t i = 0; i < y.size(); ++i) {
      if (rng_.next_double() < keep_prob_) {
        mask_[i] = scale;
        y[i] *= scale;
      } else {
        mask_[i] = T(0);
        y[i] = T(0);
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& upstream) override {
    if (mask_.empty()) return upstream;  // keep_prob == 1 or infer
    TensorT<T> g = upstream;
    for (size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
    return g;
  }

  // Test hook: restart the mask stream.
  void reseat_rng(Rng rng) { rng_ = rng; }

  double keep_prob() const { return keep_prob_; }

 private:
  double keep_prob_;
  Rng rng_;
  TensorT<T> mask_;
};

// Reshapes each sample: {n, ...} <-> {n, dims...}. Empty dims flattens to 1-D.
template <typename T>
class ReshapeLayer : public Layer<T> {
 public:
  explicit ReshapeLayer(std::vector<size_t> sample_dims) : sample_dims_(std::move(sample_dims)) {}

  const char* kind() const override { return "reshape"; }

  TensorT<T> forward(const TensorT<T>& x, Mode) override {
    if (x.rank() < 1) throw_dimension("reshape: scalar input");
    in_shape_ = x.shape();
    size_t n = x.dim(0);
    std::vector<size_t> out = {n};
    if (sample_dims_.empty()) {
      out.push_back(x.size() / n);
    } else {
      out.insert(out.end(), sample_dims_.begin(), sample_dims_.end());
    }
    return x.reshaped(out);
  }

  TensorT<T> backward(const TensorT<T>& upstream) override { return upstream.reshaped(in_shape_); }

 private:
  std::vector<size_t> sample_dims_;
  std::vector<size_t> in_shape_;
};

}  // namespace dlsvm
