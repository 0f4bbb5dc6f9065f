#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dlsvm/dlsvm.h"

namespace fs = std::filesystem;

namespace {

// Exit codes: 0 success, 2 input, 3 usage/config, 4 file format or shape
// mismatch, 5 numeric failure, 1 internal.
int exit_code(dlsvm_status st) {
  switch (st) {
    case DLSVM_OK: return 0;
    case DLSVM_ERR_INPUT: return 2;
    case DLSVM_ERR_CONFIG: return 3;
    case DLSVM_ERR_FORMAT: return 4;
    case DLSVM_ERR_DIMENSION: return 4;
    case DLSVM_ERR_NUMERIC: return 5;
    case DLSVM_ERR_INTERNAL: return 1;
  }
  return 1;
}

int fail(dlsvm_status st) {
  std::fprintf(stderr, "error: %s\n", dlsvm_last_error());
  return exit_code(st);
}

struct OwnedString {
  char* s = nullptr;
  ~OwnedString() { dlsvm_free_string(s); }
};

bool write_text_file(const std::string& path, const char* text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  f.flush();
  return bool(f);
}

size_t parse_width(const std::string& w) {
  if (w == "auto") return 0;
  return std::stoul(w);
}

struct ConvertArgs {
  std::string in, out, width = "auto", manifest;
  bool verbose = false;
};

// Reads back the PGM header of a file we just wrote, for the manifest.
bool pgm_dims(const std::string& path, size_t& w, size_t& h) {
  std::ifstream f(path, std::ios::binary);
  std::string magic;
  return bool(f >> magic >> w >> h);
}

int run_convert(const ConvertArgs& a) {
  size_t width = parse_width(a.width);
  std::fprintf(stderr, "convert: input=%s output=%s width=%s\n", a.in.c_str(), a.out.c_str(),
              a.width.c_str());
  if (!fs::exists(a.in)) {
    std::fprintf(stderr, "error: %s does not exist\n", a.in.c_str());
    return 2;
  }

  std::string manifest = "source,width,height\n";
  size_t done = 0, skipped = 0;
  auto render = [&](const std::string& src, const std::string& dst) {
    dlsvm_status st = dlsvm_render_binary(src.c_str(), dst.c_str(), width);
    if (st != DLSVM_OK) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", src.c_str(), dlsvm_last_error());
      ++skipped;
      return;
    }
    size_t w = 0, h = 0;
    pgm_dims(dst, w, h);
    manifest += src + "," + std::to_string(w) + "," + std::to_string(h) + "\n";
    if (a.verbose) std::printf("%s -> %s\n", src.c_str(), dst.c_str());
    ++done;
  };

  std::string manifest_path = a.manifest;
  if (fs::is_regular_file(a.in)) {
    render(a.in, a.out);
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(a.in))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& src : files) {
      fs::path dst = fs::path(a.out) / fs::relative(src, a.in);
      dst += ".pgm";
      render(src.string(), dst.string());
    }
    if (manifest_path.empty()) manifest_path = (fs::path(a.out) / "manifest.csv").string();
  }

  if (!manifest_path.empty() && done > 0) {
    if (!write_text_file(manifest_path, manifest.c_str())) {
      std::fprintf(stderr, "error: cannot write %s\n", manifest_path.c_str());
      return 2;
    }
    std::printf("manifest: %s\n", manifest_path.c_str());
  }
  std::printf("rendered %zu file(s), skipped %zu\n", done, skipped);
  return done > 0 ? 0 : 2;
}

struct PreprocessArgs {
  std::string data, out, fit = "train";
  double ratio = 0.7;
  size_t batch = 256;
  uint64_t seed = 42;
};

int run_preprocess(const PreprocessArgs& a) {
  std::fprintf(stderr, "preprocess: data=%s out=%s ratio=%g batch=%zu seed=%llu fit-on=%s\n",
              a.data.c_str(), a.out.c_str(), a.ratio, a.batch, (unsigned long long)a.seed,
              a.fit.c_str());
  dlsvm_dataset* ds = nullptr;
  dlsvm_status st = dlsvm_dataset_build(a.data.c_str(), a.ratio, a.batch, a.seed,
                                        a.fit == "all" ? 1 : 0, &ds);
  if (st != DLSVM_OK) return fail(st);
  st = dlsvm_dataset_save(ds, a.out.c_str());
  if (st != DLSVM_OK) {
    dlsvm_dataset_free(ds);
    return fail(st);
  }
  OwnedString desc;
  if (dlsvm_dataset_describe(ds, &desc.s) == DLSVM_OK) std::fputs(desc.s, stdout);
  std::printf("wrote %s\n", a.out.c_str());
  dlsvm_dataset_free(ds);
  return 0;
}

struct TrainArgs {
  std::string dataset, model, out, log, reduction;
  size_t batch = 0, epochs = 0;
  double lr = 0, svm_c = 0, keep_prob = 0;
  uint64_t seed = 0;
  bool timing = false;
  size_t progress = 0;
  bool has_batch = false, has_epochs = false, has_lr = false, has_svm_c = false,
       has_keep = false, has_seed = false;
};

int run_train(const TrainArgs& a) {
  dlsvm_train_options opt;
  dlsvm_status st = dlsvm_train_options_init(&opt, a.model.c_str());
  if (st != DLSVM_OK) return fail(st);
  if (a.has_batch) opt.batch = a.batch;
  if (a.has_epochs) opt.epochs = a.epochs;
  if (a.has_lr) opt.lr = a.lr;
  if (a.has_svm_c) opt.svm_c = a.svm_c;
  if (a.has_keep) opt.keep_prob = a.keep_prob;
  if (a.has_seed) opt.seed = a.seed;
  if (!a.reduction.empty()) opt.reduction = a.reduction.c_str();
  if (!a.log.empty()) opt.log_path = a.log.c_str();
  opt.timing = a.timing ? 1 : 0;

  struct Progress {
    size_t every;
  } progress{a.progress};
  if (progress.every) {
    opt.user = &progress;
    opt.on_step = [](void* user, size_t step, size_t epoch, double loss, double acc) {
      auto* p = static_cast<Progress*>(user);
      if (step % p->every == 0)
        std::printf("step %zu epoch %zu loss %.6g batch_accuracy %.4f\n", step, epoch, loss,
                    acc);
    };
  }

  std::fprintf(stderr, "train: model=%s dataset=%s batch=%zu epochs=%zu lr=%g c=%g keep-prob=%g "
              "seed=%llu reduction=%s out=%s log=%s\n",
              a.model.c_str(), a.dataset.c_str(), opt.batch, opt.epochs, opt.lr, opt.svm_c,
              opt.keep_prob, (unsigned long long)opt.seed, opt.reduction,
              a.out.c_str(), a.log.empty() ? "(none)" : a.log.c_str());

  dlsvm_dataset* ds = nullptr;
  st = dlsvm_dataset_open(a.dataset.c_str(), &ds);
  if (st != DLSVM_OK) return fail(st);
  std::printf("data: %zu samples, %zu features, %zu classes (train %zu / test %zu / holdout "
              "%zu)\n",
              dlsvm_dataset_samples(ds), dlsvm_dataset_dim(ds), dlsvm_dataset_classes(ds),
              dlsvm_dataset_split_size(ds, 0), dlsvm_dataset_split_size(ds, 1),
              dlsvm_dataset_split_size(ds, 2));

  dlsvm_model* model = nullptr;
  st = dlsvm_train(ds, &opt, &model);
  if (st != DLSVM_OK) {
    dlsvm_dataset_free(ds);
    return fail(st);
  }

  dlsvm_report* rep = nullptr;
  if (dlsvm_evaluate(model, ds, 0, &rep) == DLSVM_OK) {
    std::printf("final training accuracy: %.9g\n", dlsvm_report_accuracy(rep));
    dlsvm_report_free(rep);
  }
  dlsvm_dataset_free(ds);

  st = dlsvm_model_save(model, a.out.c_str());
  if (st != DLSVM_OK) {
    dlsvm_model_free(model);
    return fail(st);
  }
  std::printf("wrote %s\n", a.out.c_str());
  if (!a.log.empty()) std::printf("step log: %s\n", a.log.c_str());
  dlsvm_model_free(model);
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, split = "test";
  std::string report, confusion, heatmap;
  bool quiet = false;
};

int split_id(const std::string& name) {
  if (name == "train") return 0;
  if (name == "test") return 1;
  if (name == "holdout") return 2;
  if (name == "all") return 3;
  return -1;
}

int run_eval(const EvalArgs& a) {
  std::fprintf(stderr, "eval: checkpoint=%s dataset=%s split=%s\n", a.checkpoint.c_str(),
              a.dataset.c_str(), a.split.c_str());
  int split = split_id(a.split);
  if (split < 0) {
    std::fprintf(stderr, "error: --split must be train, test, holdout, or all\n");
    return 3;
  }
  dlsvm_model* model = nullptr;
  dlsvm_status st = dlsvm_model_open(a.checkpoint.c_str(), &model);
  if (st != DLSVM_OK) return fail(st);
  dlsvm_dataset* ds = nullptr;
  st = dlsvm_dataset_open(a.dataset.c_str(), &ds);
  if (st != DLSVM_OK) {
    dlsvm_model_free(model);
    return fail(st);
  }
  dlsvm_report* rep = nullptr;
  st = dlsvm_evaluate(model, ds, split, &rep);
  dlsvm_dataset_free(ds);
  dlsvm_model_free(model);
  if (st != DLSVM_OK) return fail(st);

  int rc = 0;
  auto emit = [&](int kind, const std::string& path) {
    if (path.empty() || rc != 0) return;
    OwnedString text;
    dlsvm_status rst = dlsvm_report_render(rep, kind, &text.s);
    if (rst != DLSVM_OK) {
      rc = fail(rst);
      return;
    }
    if (!write_text_file(path, text.s)) {
      std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
      rc = 2;
      return;
    }
    std::printf("wrote %s\n", path.c_str());
  };

  if (!a.quiet) {
    OwnedString text;
    if (dlsvm_report_render(rep, 0, &text.s) == DLSVM_OK) std::fputs(text.s, stdout);
  }
  emit(1, a.report);
  emit(2, a.confusion);
  emit(3, a.heatmap);
  if (rc == 0)
    std::printf("%s accuracy: %.9g (%zu samples)\n", a.split.c_str(),
                dlsvm_report_accuracy(rep), dlsvm_report_total(rep));
  dlsvm_report_free(rep);
  return rc;
}

struct PredictArgs {
  std::string checkpoint, input;
};

int run_predict(const PredictArgs& a) {
  std::fprintf(stderr, "predict: checkpoint=%s input=%s\n", a.checkpoint.c_str(), a.input.c_str());
  dlsvm_model* model = nullptr;
  dlsvm_status st = dlsvm_model_open(a.checkpoint.c_str(), &model);
  if (st != DLSVM_OK) return fail(st);
  size_t classes = dlsvm_model_classes(model);
  std::vector<double> scores(classes);
  size_t label = 0;
  st = dlsvm_predict_file(model, a.input.c_str(), &label, scores.data());
  if (st != DLSVM_OK) {
    dlsvm_model_free(model);
    return fail(st);
  }
  auto name_of = [&](size_t k) {
    const char* n = dlsvm_model_class_name(model, k);
    return n ? std::string(n) : "class " + std::to_string(k);
  };
  std::printf("predicted: %s\n", name_of(label).c_str());
  std::vector<size_t> order(classes);
  std::iota(order.begin(), order.end(), size_t(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t l, size_t r) { return scores[l] > scores[r]; });
  for (size_t k : order) std::printf("%s %.9g\n", name_of(k).c_str(), scores[k]);
  dlsvm_model_free(model);
  return 0;
}

struct GradcheckArgs {
  std::string model = "all", scale = "mini";
  uint64_t seed = 7;
  double eps = 1e-5;
  double threshold = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  std::fprintf(stderr, "gradcheck: model=%s scale=%s seed=%llu eps=%g threshold=%g\n",
              a.model.c_str(), a.scale.c_str(), (unsigned long long)a.seed, a.eps,
              a.threshold);
  std::vector<std::string> kinds;
  if (a.model == "all")
    kinds = {"cnn-svm", "gru-svm", "mlp-svm"};
  else
    kinds = {a.model};
  bool all_pass = true;
  for (const auto& kind : kinds) {
    int pass = 0;
    OwnedString report;
    dlsvm_status st =
        dlsvm_gradcheck(kind.c_str(), a.seed, a.eps, a.threshold, &pass, &report.s);
    if (st != DLSVM_OK) return fail(st);
    std::fputs(report.s, stdout);
    all_pass = all_pass && pass;
  }
  if (!all_pass) {
    std::fprintf(stderr, "error: gradient check failed\n");
    return 5;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dlsvm: train and evaluate malware-image classifiers (CNN, GRU, MLP) with a "
      "squared-hinge SVM output layer.\n"
      "Exit codes: 0 ok, 2 bad input, 3 bad option, 4 bad file format, 5 numeric "
      "failure, 1 internal error."};
  app.require_subcommand(1);
  app.set_version_flag("--version", dlsvm_version());
  app.fallthrough();
  app.set_config("--config", "",
                 "Read options from an INI file with one [section] per subcommand");

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand(
      "convert", "Render raw binaries as grayscale images (PGM). A directory input is "
                 "mirrored recursively and a manifest CSV is written.");
  c_conv->add_option("-i,--input", conv.in, "Input file or directory")->required();
  c_conv->add_option("-o,--output", conv.out, "Output file or directory")->required();
  c_conv->add_option("--width", conv.width, "Image width in pixels, or auto (default)");
  c_conv->add_option("--manifest", conv.manifest,
                     "Manifest CSV path (default <output>/manifest.csv for directories)");
  c_conv->add_flag("-v,--verbose", conv.verbose, "Print every rendered file");

  PreprocessArgs prep;
  auto* c_prep = app.add_subcommand(
      "preprocess", "Build a dataset container from <root>/<class>/<image> directories.");
  c_prep->add_option("-d,--data", prep.data, "Image tree root")->required();
  c_prep->add_option("-o,--out", prep.out, "Output dataset container")->required();
  c_prep->add_option("--ratio", prep.ratio, "Training fraction (default 0.7)");
  c_prep->add_option("--batch", prep.batch,
                     "Batch size the splits are truncated to (default 256)");
  c_prep->add_option("--seed", prep.seed, "Split shuffle seed (default 42)");
  c_prep->add_option("--fit-on", prep.fit,
                     "Fit standardization on the train split or on all samples")
      ->check(CLI::IsMember({"train", "all"}));

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a classifier on a dataset container.");
  c_train->add_option("-d,--dataset", tr.dataset, "Dataset container")->required();
  c_train->add_option("-m,--model", tr.model, "cnn-svm, gru-svm, or mlp-svm")->required();
  c_train->add_option("-o,--out", tr.out, "Output model checkpoint")->required();
  auto* o_batch = c_train->add_option("--batch", tr.batch, "Batch size (default 256)");
  auto* o_epochs = c_train->add_option("--epochs", tr.epochs, "Epochs (default 100)");
  auto* o_lr = c_train->add_option("--lr", tr.lr, "Learning rate (default 1e-3)");
  auto* o_svmc = c_train->add_option(
      "--c", tr.svm_c, "Hinge penalty C (default 10 for cnn/gru, 0.5 for mlp)");
  auto* o_keep = c_train->add_option(
      "--keep-prob", tr.keep_prob,
      "Dropout keep probability, 1 disables (default 0.85 for cnn/gru, 1 for mlp)");
  auto* o_seed = c_train->add_option("--seed", tr.seed, "Run seed (default 42)");
  c_train->add_option("--reduction", tr.reduction, "Hinge reduction: sum (default) or mean")
      ->check(CLI::IsMember({"sum", "mean"}));
  c_train->add_option("--log", tr.log, "Write a per-step CSV log here");
  c_train->add_flag("--timing", tr.timing,
                    "Record real wall_ms in the step log (log stops being byte-identical "
                    "across runs)");
  c_train->add_option("--progress", tr.progress, "Print progress every N steps (0 = quiet)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a trained model on a dataset split.");
  c_eval->add_option("-c,--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  c_eval->add_option("-d,--dataset", ev.dataset, "Dataset container")->required();
  c_eval->add_option("--split", ev.split, "train, test, holdout, or all (default test)");
  c_eval->add_option("--report", ev.report, "Write per-class metrics CSV here");
  c_eval->add_option("--confusion", ev.confusion, "Write confusion matrix CSV here");
  c_eval->add_option("--heatmap", ev.heatmap, "Write confusion heatmap SVG here");
  c_eval->add_flag("-q,--quiet", ev.quiet, "Skip the text report on stdout");

  PredictArgs pr;
  auto* c_pred = app.add_subcommand(
      "predict", "Classify one file: PNG/PGM images are decoded, anything else is rendered "
                 "from raw bytes. Prints the family, then all scores descending.");
  c_pred->add_option("-c,--checkpoint", pr.checkpoint, "Model checkpoint")->required();
  c_pred->add_option("-i,--input", pr.input, "Image or raw binary")->required();

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand(
      "gradcheck", "Check analytic gradients against central finite differences.");
  c_gc->add_option("-m,--model", gc.model, "cnn-svm, gru-svm, mlp-svm, or all (default)")
      ->check(CLI::IsMember({"all", "cnn-svm", "gru-svm", "mlp-svm"}));
  c_gc->add_option("--scale", gc.scale, "Model scale (mini)")
      ->check(CLI::IsMember({"mini"}));
  c_gc->add_option("--seed", gc.seed, "Probe seed (default 7)");
  c_gc->add_option("--eps", gc.eps, "Finite-difference step (default 1e-5)");
  c_gc->add_option("--threshold", gc.threshold, "Max relative error (default 1e-4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  if (app.got_subcommand(c_conv)) return run_convert(conv);
  if (app.got_subcommand(c_prep)) return run_preprocess(prep);
  if (app.got_subcommand(c_train)) {
    tr.has_batch = o_batch->count() > 0;
    tr.has_epochs = o_epochs->count() > 0;
    tr.has_lr = o_lr->count() > 0;
    tr.has_svm_c = o_svmc->count() > 0;
    tr.has_keep = o_keep->count() > 0;
    tr.has_seed = o_seed->count() > 0;
    return run_train(tr);
  }
  if (app.got_subcommand(c_eval)) return run_eval(ev);
  if (app.got_subcommand(c_pred)) return run_predict(pr);
  if (app.got_subcommand(c_gc)) return run_gradcheck(gc);
  return 1;
}
