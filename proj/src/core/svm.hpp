#pragma once

#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace dlsvm {

enum class Reduction { Sum, Mean };

inline const char* reduction_name(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

inline Reduction reduction_from_name(const std::string& s) {
  if (s == "sum") return Reduction::Sum;
  if (s == "mean") return Reduction::Mean;
  throw_config("unknown reduction: " + s + " (expected sum or mean)");
}

// One-vs-all linear L2-SVM output layer: K binary scorers, each treating its
// class as positive and the rest as negative. Trained with the squared hinge
//
//   (1/p)||W||_F^2 + C * sum_i sum_k max(0, 1 - t_ik s_ik)^2
//
// which is differentiable, so it can sit on top of a network and be
// minimized together with it. `reduction` switches the hinge term between
// sum over the batch (default) and mean.
template <typename T>
struct SvmHead {
  TensorT<T> w;  // {K, d}: one weight row per class
  TensorT<T> b;  // {K}
  T penalty_c = T(1);
  Reduction reduction = Reduction::Sum;

  SvmHead() = default;
  SvmHead(size_t classes, size_t dim, T c, Reduction red)
      : w({classes, dim}), b({classes}), penalty_c(c), reduction(red) {
    if (classes < 2) throw_config("svm head: need at least 2 classes");
    if (dim < 1) throw_config("svm head: need at least 1 feature");
    if (!(c > T(0))) throw_config("svm head: penalty C must be positive");
  }

  size_t classes() const { return w.dim(0); }
  size_t dim() const { return w.dim(1); }
};

// scores = x W^T + b, {p, K}
template <typename T>
TensorT<T> svm_scores(const SvmHead<T>& head, const TensorT<T>& x) {
  if (x.rank() != 2 || x.dim(1) != head.dim())
    throw_dimension("svm scores: input " + x.shape_str() + " does not match head dim " +
                    std::to_string(head.dim()));
  TensorT<T> s = matmul_nt(x, head.w);
  const size_t p = s.dim(0), k = s.dim(1);
  for (size_t i = 0; i < p; ++i)
    for (size_t j = 0; j < k; ++j) s[i * k + j] += head.b[j];
  return s;
}

// +1 at the label column, -1 elsewhere.
template <typename T>
TensorT<T> ova_encode(const std::vector<int>& labels, size_t classes) {
  TensorT<T> t({labels.size(), classes}, T(-1));
  for (size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || size_t(y) >= classes)
      throw_input("ova_encode: label " + std::to_string(y) + " outside [0, " +
                  std::to_string(classes) + ")");
    t[i * classes + size_t(y)] = T(1);
  }
  return t;
}

template <typename T>
struct SvmLossResult {
  double loss = 0;
  TensorT<T> score_grad;  // dL/dscores, {p, K}
  TensorT<T> reg_grad_w;  // dL/dW from the (1/p)||W||^2 term, {K, d}
};

template <typename T>
SvmLossResult<T> l2svm_loss(const SvmHead<T>& head, const TensorT<T>& scores,
                            const TensorT<T>& targets) {
  if (scores.rank() != 2 || scores.shape() != targets.shape())
    throw_dimension("l2svm_loss: scores " + scores.shape_str() + " vs targets " +
                    targets.shape_str());
  const size_t p = scores.dim(0), k = scores.dim(1);
  if (p == 0) throw_input("l2svm_loss: empty batch");

  SvmLossResult<T> res;
  res.score_grad = TensorT<T>({p, k});
  res.reg_grad_w = TensorT<T>(head.w.shape());

  const double c = double(head.penalty_c);
  const double batch_div = head.reduction == Reduction::Mean ? double(p) : 1.0;
  double hinge = 0;
  for (size_t i = 0; i < p; ++i) {
    for (size_t j = 0; j < k; ++j) {
      const size_t idx = i * k + j;
      const double t = double(targets[idx]);
      const double margin = 1.0 - t * double(scores[idx]);
      if (margin > 0) {
        hinge += margin * margin;
        res.score_grad[idx] = T(-2.0 * c * t * margin / batch_div);
      } else {
        res.score_grad[idx] = T(0);
      }
    }
  }

  double wnorm2 = 0;
  for (size_t i = 0; i < head.w.size(); ++i) {
    const double wi = double(head.w[i]);
    wnorm2 += wi * wi;
    res.reg_grad_w[i] = T(2.0 / double(p) * wi);
  }
  res.loss = wnorm2 / double(p) + c * hinge / batch_div;
  return res;
}

// argmax over raw scores; ties break toward the smallest class index.
template <typename T>
std::vector<int> svm_predict_scores(const TensorT<T>& scores) {
  const size_t p = scores.dim(0), k = scores.dim(1);
  std::vector<int> labels(p);
  for (size_t i = 0; i < p; ++i) {
    size_t best = 0;
    for (size_t j = 1; j < k; ++j)
      if (scores[i * k + j] > scores[i * k + best]) best = j;
    labels[i] = int(best);
  }
  return labels;
}

template <typename T>
std::vector<int> svm_predict(const SvmHead<T>& head, const TensorT<T>& x) {
  return svm_predict_scores(svm_scores(head, x));
}

}  // namespace dlsvm
