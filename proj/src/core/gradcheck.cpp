#include "core/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "core/errors.hpp"

namespace dlsvm {

ModelSpec gradcheck_spec(ModelKind kind, uint64_t seed) {
  ModelSpec s;
  s.kind = kind;
  s.seed = seed;
  s.epochs = 1;
  s.svm_c = 2.0;
  s.keep_prob = 1.0;  // dropout would break the two-sided probes
  s.classes = 3;
  switch (kind) {
    case ModelKind::MlpSvm:
      s.batch = 4;
      s.input_dim = 16;
      s.image_h = 4;
      s.image_w = 4;
      s.mlp_hidden = {10, 8, 6};
      break;
    case ModelKind::CnnSvm:
      s.batch = 3;
      s.input_dim = 64;
      s.image_h = 8;
      s.image_w = 8;
      s.image_c = 1;
      s.cnn_filters = {2, 4};
      s.cnn_kernel = 5;
      s.cnn_dense = 8;
      s.pool_window = 2;
      s.pool_stride = 2;
      break;
    case ModelKind::GruSvm:
      s.batch = 3;
      s.input_dim = 16;
      s.image_h = 4;  // timesteps
      s.image_w = 4;  // features per step
      s.gru_layers = 2;
      s.gru_hidden = 4;
      break;
  }
  return s;
}

GradCheckReport gradcheck_run(const ModelSpec& spec, double eps, double threshold) {
  if (!(eps > 0)) throw_config("gradcheck: eps must be positive");
  if (spec.keep_prob < 1.0)
    throw_config("gradcheck: dropout must be disabled (keep_prob = 1)");

  Model<double> model = build_model<double>(spec);
  Rng rng = Rng::stream(spec.seed, "gradcheck");
  TensorD x({spec.batch, spec.input_dim});
  for (auto& v : x.vec()) v = rng.normal();
  std::vector<int> y(spec.batch);
  for (auto& v : y) v = int(rng.next_below(spec.classes));

  model.zero_grads();
  model.loss_and_backward(x, y);

  std::vector<ParamRef<double>> params = model.parameters();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad->vec());

  auto loss_at = [&]() {
    TensorD feats = model.features_forward(x, Mode::Train);
    TensorD sc = svm_scores(model.head, feats);
    TensorD targets = ova_encode<double>(y, model.head.classes());
    return l2svm_loss(model.head, sc, targets).loss;
  };

  GradCheckReport report;
  report.model = model_kind_name(spec.kind);
  report.eps = eps;
  report.threshold = threshold;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    GradCheckEntry entry;
    entry.param = params[pi].name;
    entry.elements = params[pi].value->size();
    double* theta = params[pi].value->data();
    for (size_t i = 0; i < entry.elements; ++i) {
      double saved = theta[i];
      theta[i] = saved + eps;
      double up = loss_at();
      theta[i] = saved - eps;
      double down = loss_at();
      theta[i] = saved;
      double numeric = (up - down) / (2 * eps);
      double a = analytic[pi][i];
      double rel = std::fabs(a - numeric) /
                   std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err <= threshold;
  return report;
}

GradCheckReport gradcheck_model(ModelKind kind, uint64_t seed, double eps, double threshold) {
  return gradcheck_run(gradcheck_spec(kind, seed), eps, threshold);
}

std::string gradcheck_text(const GradCheckReport& r) {
  std::string out;
  char buf[192];
  for (const auto& e : r.entries) {
    std::snprintf(buf, sizeof(buf), "  %-16s %10.3e  (%zu values)\n", e.param.c_str(),
                  e.max_rel_err, e.elements);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%s: max relative error %.3e (eps %.1e, threshold %.1e) %s\n",
                r.model.c_str(), r.max_rel_err, r.eps, r.threshold,
                r.pass ? "PASS" : "FAIL");
  out += buf;
  return out;
}

}  // namespace dlsvm
