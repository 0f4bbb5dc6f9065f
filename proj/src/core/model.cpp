#include "core/model.hpp"

#include "core/errors.hpp"

namespace dlsvm {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::CnnSvm: return "cnn-svm";
    case ModelKind::GruSvm: return "gru-svm";
    case ModelKind::MlpSvm: return "mlp-svm";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& s) {
  if (s == "cnn-svm" || s == "cnn") return ModelKind::CnnSvm;
  if (s == "gru-svm" || s == "gru") return ModelKind::GruSvm;
  if (s == "mlp-svm" || s == "mlp") return ModelKind::MlpSvm;
  throw_config("unknown model '" + s + "' (expected cnn-svm, gru-svm, or mlp-svm)");
}

ModelSpec defaults_for(ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  switch (kind) {
    case ModelKind::CnnSvm:
      s.svm_c = 10.0;
      s.keep_prob = 0.85;
      break;
    case ModelKind::GruSvm:
      s.svm_c = 10.0;
      s.keep_prob = 0.85;
      break;
    case ModelKind::MlpSvm:
      s.svm_c = 0.5;
      s.keep_prob = 1.0;
      break;
  }
  return s;
}

void ModelSpec::validate() const {
  if (batch < 1) throw_config("batch must be at least 1");
  if (epochs < 1) throw_config("epochs must be at least 1");
  if (lr < 0) throw_config("learning rate must be nonnegative");
  if (!(svm_c > 0)) throw_config("svm penalty must be positive");
  if (!(keep_prob > 0) || keep_prob > 1) throw_config("keep_prob must be in (0, 1]");
  if (classes < 2) throw_config("need at least 2 classes");
  if (input_dim < 1) throw_config("input_dim must be positive");
  switch (kind) {
    case ModelKind::CnnSvm:
      if (cnn_filters.empty()) throw_config("cnn-svm needs at least one conv block");
      if (cnn_kernel < 1) throw_config("conv kernel must be at least 1");
      if (pool_window < 1 || pool_stride < 1) throw_config("pool window/stride must be positive");
      if (cnn_dense < 1) throw_config("dense width must be positive");
      break;
    case ModelKind::GruSvm:
      if (gru_layers < 1) throw_config("gru-svm needs at least one recurrent layer");
      if (gru_hidden < 1) throw_config("gru hidden size must be positive");
      break;
    case ModelKind::MlpSvm:
      if (mlp_hidden.empty()) throw_config("mlp-svm needs at least one hidden layer");
      for (size_t h : mlp_hidden)
        if (h < 1) throw_config("mlp hidden widths must be positive");
      break;
  }
}

}  // namespace dlsvm
