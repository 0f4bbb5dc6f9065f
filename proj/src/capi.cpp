#include "dlsvm/dlsvm.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "core/checkpoint.hpp"
#include "core/data.hpp"
#include "core/errors.hpp"
#include "core/gradcheck.hpp"
#include "core/io_util.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/train.hpp"

struct dlsvm_dataset {
  dlsvm::Dataset ds;
};

struct dlsvm_model {
  dlsvm::Model<float> model;
  std::vector<std::string> class_names;
  std::vector<double> mean, stddev;
  std::unique_ptr<dlsvm::Adam<float>> opt;
};

struct dlsvm_report {
  dlsvm::EvalReport rep;
};

namespace {

thread_local std::string g_last_error;

dlsvm_status status_of(dlsvm::ErrorKind kind) {
  using dlsvm::ErrorKind;
  switch (kind) {
    case ErrorKind::Input: return DLSVM_ERR_INPUT;
    case ErrorKind::Config: return DLSVM_ERR_CONFIG;
    case ErrorKind::Format: return DLSVM_ERR_FORMAT;
    case ErrorKind::Numeric: return DLSVM_ERR_NUMERIC;
    case ErrorKind::Dimension: return DLSVM_ERR_DIMENSION;
    case ErrorKind::Internal: return DLSVM_ERR_INTERNAL;
  }
  return DLSVM_ERR_INTERNAL;
}

template <typename F>
dlsvm_status wrap(F&& body) {
  try {
    body();
    g_last_error.clear();
    return DLSVM_OK;
  } catch (const dlsvm::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DLSVM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DLSVM_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) dlsvm::throw_input(what);
}

const std::vector<uint32_t>* split_of(const dlsvm::Dataset& ds, int split) {
  switch (split) {
    case 0: return &ds.split.train;
    case 1: return &ds.split.test;
    case 2: return &ds.split.holdout;
    default: return nullptr;
  }
}

dlsvm::Tensor standardized_image_row(const dlsvm_model* m, const char* image_path) {
  const dlsvm::ModelSpec& spec = m->model.spec;
  // Image files are decoded; anything else is treated as a raw binary and
  // rendered the same way the dataset was.
  std::string head = dlsvm::read_entire_file(image_path);
  dlsvm::GrayImage img;
  bool is_png = head.size() >= 8 && std::memcmp(head.data(), "\x89PNG\r\n\x1a\n", 8) == 0;
  bool is_pgm = head.size() >= 2 && head[0] == 'P' && (head[1] == '5' || head[1] == '2');
  if (is_png || is_pgm) {
    img = dlsvm::read_gray_image(image_path);
  } else {
    std::vector<uint8_t> bytes(head.begin(), head.end());
    img = dlsvm::bytes_to_image(bytes, 0);
  }
  std::vector<float> row = dlsvm::resize_bilinear(img, spec.image_h, spec.image_w);
  if (spec.image_c != 1 && spec.kind == dlsvm::ModelKind::CnnSvm)
    dlsvm::throw_config("only single-channel models can score image files");
  if (row.size() != spec.input_dim)
    dlsvm::throw_dimension("resampled image does not match the model input size");
  if (m->mean.size() != spec.input_dim)
    dlsvm::throw_config("model carries no standardization statistics");
  for (size_t j = 0; j < row.size(); ++j)
    row[j] = float((row[j] - m->mean[j]) / m->stddev[j]);
  return dlsvm::Tensor::from_data({1, spec.input_dim}, std::move(row));
}

}  // namespace

extern "C" {

const char* dlsvm_version(void) { return "1.0.0"; }

const char* dlsvm_last_error(void) { return g_last_error.c_str(); }

void dlsvm_free_string(char* s) { std::free(s); }

dlsvm_status dlsvm_render_binary(const char* in_path, const char* out_path, size_t width) {
  return wrap([&] {
    require(in_path && out_path, "render: null path");
    std::string raw = dlsvm::read_entire_file(in_path);
    std::vector<uint8_t> bytes(raw.begin(), raw.end());
    dlsvm::GrayImage img = dlsvm::bytes_to_image(bytes, width);
    dlsvm::write_pgm(out_path, img);
  });
}

dlsvm_status dlsvm_dataset_build(const char* image_root, double train_frac, size_t batch,
                                 uint64_t seed, int fit_on_all, dlsvm_dataset** out) {
  return wrap([&] {
    require(image_root && out, "dataset_build: null argument");
    dlsvm::RawDataset raw = dlsvm::load_image_tree(image_root);
    for (const auto& w : raw.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    auto handle = std::make_unique<dlsvm_dataset>();
    handle->ds = dlsvm::build_dataset(std::move(raw), train_frac, batch, seed,
                                      fit_on_all != 0);
    *out = handle.release();
  });
}

dlsvm_status dlsvm_dataset_open(const char* path, dlsvm_dataset** out) {
  return wrap([&] {
    require(path && out, "dataset_open: null argument");
    auto handle = std::make_unique<dlsvm_dataset>();
    handle->ds = dlsvm::load_dataset(path);
    *out = handle.release();
  });
}

dlsvm_status dlsvm_dataset_save(const dlsvm_dataset* ds, const char* path) {
  return wrap([&] {
    require(ds && path, "dataset_save: null argument");
    dlsvm::save_dataset(path, ds->ds);
  });
}

void dlsvm_dataset_free(dlsvm_dataset* ds) { delete ds; }

size_t dlsvm_dataset_samples(const dlsvm_dataset* ds) { return ds ? ds->ds.samples() : 0; }

size_t dlsvm_dataset_dim(const dlsvm_dataset* ds) { return ds ? ds->ds.dim() : 0; }

size_t dlsvm_dataset_classes(const dlsvm_dataset* ds) { return ds ? ds->ds.classes() : 0; }

const char* dlsvm_dataset_class_name(const dlsvm_dataset* ds, size_t index) {
  if (!ds || index >= ds->ds.classes()) return nullptr;
  return ds->ds.class_names[index].c_str();
}

size_t dlsvm_dataset_split_size(const dlsvm_dataset* ds, int split) {
  if (!ds) return 0;
  const std::vector<uint32_t>* idx = split_of(ds->ds, split);
  return idx ? idx->size() : 0;
}

dlsvm_status dlsvm_dataset_describe(const dlsvm_dataset* ds, char** out) {
  return wrap([&] {
    require(ds && out, "dataset_describe: null argument");
    *out = dup_string(dlsvm::dataset_summary(ds->ds));
  });
}

dlsvm_status dlsvm_train_options_init(dlsvm_train_options* options, const char* model) {
  return wrap([&] {
    require(options && model, "train_options_init: null argument");
    dlsvm::ModelSpec spec = dlsvm::defaults_for(dlsvm::model_kind_from_name(model));
    *options = dlsvm_train_options{};
    options->model = model;
    options->batch = spec.batch;
    options->epochs = spec.epochs;
    options->lr = spec.lr;
    options->svm_c = spec.svm_c;
    options->keep_prob = spec.keep_prob;
    options->seed = spec.seed;
    options->reduction = "sum";
  });
}

dlsvm_status dlsvm_train(const dlsvm_dataset* ds, const dlsvm_train_options* options,
                         dlsvm_model** out) {
  return wrap([&] {
    require(ds && options && options->model && out, "train: null argument");
    dlsvm::ModelSpec spec = dlsvm::defaults_for(dlsvm::model_kind_from_name(options->model));
    spec.batch = options->batch;
    spec.epochs = options->epochs;
    spec.lr = options->lr;
    spec.svm_c = options->svm_c;
    spec.keep_prob = options->keep_prob;
    spec.seed = options->seed;
    spec.reduction = dlsvm::reduction_from_name(options->reduction ? options->reduction
                                                                   : "sum");
    spec.classes = ds->ds.classes();
    spec.input_dim = ds->ds.dim();
    if (spec.input_dim != spec.image_h * spec.image_w * spec.image_c) {
      // Square single-channel layout implied by the feature width.
      size_t side = size_t(std::sqrt(double(spec.input_dim)));
      if (side * side != spec.input_dim)
        dlsvm::throw_config("dataset features are not a square image");
      spec.image_h = spec.image_w = side;
      spec.image_c = 1;
    }

    auto handle = std::make_unique<dlsvm_model>();
    handle->model = dlsvm::build_model<float>(spec);
    handle->class_names = ds->ds.class_names;
    handle->mean = ds->ds.mean;
    handle->stddev = ds->ds.stddev;
    handle->opt = std::make_unique<dlsvm::Adam<float>>(
        dlsvm::AdamConfig{spec.lr, 0.9, 0.999, 1e-8}, handle->model.parameters());

    dlsvm::Tensor tx = dlsvm::gather_rows(ds->ds.features, ds->ds.split.train);
    std::vector<int> ty = dlsvm::gather_labels(ds->ds.labels, ds->ds.split.train);

    std::ofstream log;
    if (options->log_path) {
      log.open(options->log_path, std::ios::binary | std::ios::trunc);
      if (!log) dlsvm::throw_input(std::string("cannot write ") + options->log_path);
      log << dlsvm::kStepLogHeader << "\n";
    }
    auto sink = [&](const dlsvm::StepRecord& rec) {
      if (log.is_open()) log << dlsvm::step_log_line(rec) << "\n";
      if (options->on_step)
        options->on_step(options->user, rec.step, rec.epoch, rec.loss, rec.accuracy);
    };
    dlsvm::train_model(handle->model, tx, ty, *handle->opt, sink, options->timing != 0);
    if (log.is_open()) {
      log.flush();
      if (!log) dlsvm::throw_input(std::string("failed writing ") + options->log_path);
    }
    *out = handle.release();
  });
}

dlsvm_status dlsvm_model_open(const char* path, dlsvm_model** out) {
  return wrap([&] {
    require(path && out, "model_open: null argument");
    dlsvm::LoadedCheckpoint loaded = dlsvm::load_checkpoint(path);
    auto handle = std::make_unique<dlsvm_model>();
    handle->model = std::move(loaded.model);
    handle->class_names = std::move(loaded.class_names);
    handle->mean = std::move(loaded.mean);
    handle->stddev = std::move(loaded.stddev);
    if (loaded.has_adam) {
      handle->opt = std::make_unique<dlsvm::Adam<float>>(
          dlsvm::AdamConfig{handle->model.spec.lr, 0.9, 0.999, 1e-8},
          handle->model.parameters());
      handle->opt->restore(loaded.adam_steps, loaded.adam_m, loaded.adam_v);
    }
    *out = handle.release();
  });
}

dlsvm_status dlsvm_model_save(const dlsvm_model* m, const char* path) {
  return wrap([&] {
    require(m && path, "model_save: null argument");
    auto* mut = const_cast<dlsvm_model*>(m);
    dlsvm::save_checkpoint(path, mut->model, mut->opt.get(), m->class_names, m->mean,
                           m->stddev);
  });
}

void dlsvm_model_free(dlsvm_model* m) { delete m; }

const char* dlsvm_model_kind(const dlsvm_model* m) {
  return m ? dlsvm::model_kind_name(m->model.spec.kind) : nullptr;
}

size_t dlsvm_model_classes(const dlsvm_model* m) { return m ? m->model.spec.classes : 0; }

const char* dlsvm_model_class_name(const dlsvm_model* m, size_t index) {
  if (!m || index >= m->class_names.size()) return nullptr;
  return m->class_names[index].c_str();
}

dlsvm_status dlsvm_predict_file(const dlsvm_model* m, const char* image_path, size_t* label,
                                double* scores) {
  return wrap([&] {
    require(m && image_path && label, "predict: null argument");
    auto* mut = const_cast<dlsvm_model*>(m);
    dlsvm::Tensor x = standardized_image_row(m, image_path);
    dlsvm::Tensor sc = mut->model.scores(x, dlsvm::Mode::Infer);
    std::vector<int> pred = dlsvm::svm_predict_scores(sc);
    *label = size_t(pred[0]);
    if (scores)
      for (size_t k = 0; k < sc.size(); ++k) scores[k] = double(sc[k]);
  });
}

dlsvm_status dlsvm_evaluate(const dlsvm_model* m, const dlsvm_dataset* ds, int split,
                            dlsvm_report** out) {
  return wrap([&] {
    require(m && ds && out, "evaluate: null argument");
    if (ds->ds.dim() != m->model.spec.input_dim)
      dlsvm::throw_dimension("dataset feature width does not match the model");
    if (ds->ds.classes() != m->model.spec.classes)
      dlsvm::throw_dimension("dataset class count does not match the model");

    std::vector<uint32_t> all;
    const std::vector<uint32_t>* idx = nullptr;
    if (split == 3) {
      all.resize(ds->ds.samples());
      for (size_t i = 0; i < all.size(); ++i) all[i] = uint32_t(i);
      idx = &all;
    } else {
      idx = split_of(ds->ds, split);
      if (!idx) dlsvm::throw_config("split must be 0 (train), 1 (test), 2 (holdout), or 3 (all)");
    }
    if (idx->empty()) dlsvm::throw_input("selected split is empty");

    dlsvm::Tensor x = dlsvm::gather_rows(ds->ds.features, *idx);
    std::vector<int> truth = dlsvm::gather_labels(ds->ds.labels, *idx);
    auto* mut = const_cast<dlsvm_model*>(m);
    std::vector<int> pred = dlsvm::predict_batched(mut->model, x, m->model.spec.batch);
    auto handle = std::make_unique<dlsvm_report>();
    handle->rep = dlsvm::evaluate(truth, pred, ds->ds.class_names);
    *out = handle.release();
  });
}

void dlsvm_report_free(dlsvm_report* r) { delete r; }

double dlsvm_report_accuracy(const dlsvm_report* r) { return r ? r->rep.accuracy : 0.0; }

size_t dlsvm_report_total(const dlsvm_report* r) { return r ? r->rep.total : 0; }

size_t dlsvm_report_classes(const dlsvm_report* r) { return r ? r->rep.classes() : 0; }

double dlsvm_report_class_metric(const dlsvm_report* r, size_t index, int what) {
  if (!r || index >= r->rep.classes()) return 0.0;
  const dlsvm::ClassMetrics& m = r->rep.per_class[index];
  switch (what) {
    case 0: return m.precision;
    case 1: return m.recall;
    case 2: return m.f1;
    case 3: return double(m.support);
    default: return 0.0;
  }
}

size_t dlsvm_report_confusion(const dlsvm_report* r, size_t row, size_t col) {
  if (!r || row >= r->rep.classes() || col >= r->rep.classes()) return 0;
  return r->rep.at(row, col);
}

dlsvm_status dlsvm_report_render(const dlsvm_report* r, int kind, char** out) {
  return wrap([&] {
    require(r && out, "report_render: null argument");
    std::string text;
    switch (kind) {
      case 0: text = dlsvm::report_text(r->rep); break;
      case 1: text = dlsvm::report_csv(r->rep); break;
      case 2: text = dlsvm::confusion_csv(r->rep); break;
      case 3: text = dlsvm::confusion_svg(r->rep); break;
      default: dlsvm::throw_config("render kind must be 0..3");
    }
    *out = dup_string(text);
  });
}

dlsvm_status dlsvm_gradcheck(const char* model, uint64_t seed, double eps, double threshold,
                             int* pass_out, char** report_out) {
  return wrap([&] {
    require(model && pass_out, "gradcheck: null argument");
    dlsvm::GradCheckReport rep =
        dlsvm::gradcheck_model(dlsvm::model_kind_from_name(model), seed, eps, threshold);
    *pass_out = rep.pass ? 1 : 0;
    if (report_out) *report_out = dup_string(dlsvm::gradcheck_text(rep));
  });
}

}  // extern "C"
