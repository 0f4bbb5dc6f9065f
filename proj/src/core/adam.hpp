#pragma once

#include <cmath>
#include <vector>

#include "core/layers.hpp"
#include "core/tensor.hpp"

namespace dlsvm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction:
//   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
//   theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)
// Moments are stored per parameter tensor, zero-initialized.
template <typename T>
class Adam {
 public:
  Adam() = default;

  Adam(AdamConfig cfg, const std::vector<ParamRef<T>>& params) : cfg_(cfg) {
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1))
      throw_config("adam: betas must lie in [0,1)");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.value->shape(), T(0));
      v_.emplace_back(p.value->shape(), T(0));
    }
  }

  void step(const std::vector<ParamRef<T>>& params) {
    if (params.size() != m_.size()) throw_dimension("adam: parameter count changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (size_t pi = 0; pi < params.size(); ++pi) {
      TensorT<T>& theta = *params[pi].value;
      const TensorT<T>& g = *params[pi].grad;
      if (theta.shape() != g.shape() || theta.shape() != m_[pi].shape())
        throw_dimension("adam: shape mismatch on " + params[pi].name);
      TensorT<T>& m = m_[pi];
      TensorT<T>& v = v_[pi];
      for (size_t i = 0; i < theta.size(); ++i) {
        const double gi = double(g[i]);
        const double mi = cfg_.beta1 * double(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * double(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = T(mi);
        v[i] = T(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        theta[i] = T(double(theta[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long long steps_taken() const { return t_; }
  size_t moment_count() const { return m_.size(); }
  const TensorT<T>& moments_m(size_t i) const { return m_[i]; }
  const TensorT<T>& moments_v(size_t i) const { return v_[i]; }
  std::vector<TensorT<T>>& moments_m() { return m_; }
  std::vector<TensorT<T>>& moments_v() { return v_; }
  void restore(long long t, std::vector<TensorT<T>> m, std::vector<TensorT<T>> v) {
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  AdamConfig cfg_;
  long long t_ = 0;
  std::vector<TensorT<T>> m_, v_;
};

}  // namespace dlsvm
