#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/image_io.hpp"
#include "core/rng.hpp"
#include "dlsvm/dlsvm.h"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("dlsvm_capi_") + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const char* rel) const { return (path / rel).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out = s;
  dlsvm_free_string(s);
  return out;
}

// Two visually distinct classes: dark noisy images vs bright gradient images.
void write_image_tree(const fs::path& root) {
  dlsvm::Rng rng(81);
  fs::create_directories(root / "dark");
  fs::create_directories(root / "light");
  for (int i = 0; i < 16; ++i) {
    dlsvm::GrayImage img;
    img.h = img.w = 32;
    img.pixels.resize(32 * 32);
    for (auto& p : img.pixels) p = uint8_t(rng.next_below(60));
    char name[32];
    std::snprintf(name, sizeof(name), "d%02d.pgm", i);
    dlsvm::write_pgm((root / "dark" / name).string(), img);
  }
  for (int i = 0; i < 16; ++i) {
    dlsvm::GrayImage img;
    img.h = img.w = 32;
    img.pixels.resize(32 * 32);
    for (size_t y = 0; y < 32; ++y)
      for (size_t x = 0; x < 32; ++x)
        img.pixels[y * 32 + x] = uint8_t(150 + (y * 100) / 32 - rng.next_below(20));
    char name[32];
    std::snprintf(name, sizeof(name), "l%02d.pgm", i);
    dlsvm::write_pgm((root / "light" / name).string(), img);
  }
}

struct DatasetFixture {
  TempDir tmp{"fixture"};
  dlsvm_dataset* ds = nullptr;
  DatasetFixture() {
    write_image_tree(tmp.path / "root");
    REQUIRE(dlsvm_dataset_build((tmp.path / "root").string().c_str(), 0.75, 8, 99, 0, &ds) ==
            DLSVM_OK);
  }
  ~DatasetFixture() { dlsvm_dataset_free(ds); }
};

dlsvm_model* train_tiny_mlp(const dlsvm_dataset* ds, const char* log_path = nullptr) {
  dlsvm_train_options opt;
  REQUIRE(dlsvm_train_options_init(&opt, "mlp-svm") == DLSVM_OK);
  opt.batch = 8;
  opt.epochs = 2;
  opt.seed = 5;
  opt.log_path = log_path;
  dlsvm_model* model = nullptr;
  REQUIRE(dlsvm_train(ds, &opt, &model) == DLSVM_OK);
  return model;
}

}  // namespace

TEST_CASE("version and error strings are always present") {
  REQUIRE(dlsvm_version() != nullptr);
  CHECK(std::strlen(dlsvm_version()) > 0);
  REQUIRE(dlsvm_last_error() != nullptr);
}

TEST_CASE("dataset build reports sizes, names, and split counts") {
  DatasetFixture fx;
  CHECK(dlsvm_dataset_samples(fx.ds) == 32);
  CHECK(dlsvm_dataset_dim(fx.ds) == 1024);
  CHECK(dlsvm_dataset_classes(fx.ds) == 2);
  CHECK(std::string(dlsvm_dataset_class_name(fx.ds, 0)) == "dark");
  CHECK(std::string(dlsvm_dataset_class_name(fx.ds, 1)) == "light");
  CHECK(dlsvm_dataset_class_name(fx.ds, 2) == nullptr);
  CHECK(dlsvm_dataset_split_size(fx.ds, 0) == 24);  // floor(32*0.75) fits 3 batches of 8
  CHECK(dlsvm_dataset_split_size(fx.ds, 1) == 8);
  CHECK(dlsvm_dataset_split_size(fx.ds, 2) == 0);

  char* text = nullptr;
  REQUIRE(dlsvm_dataset_describe(fx.ds, &text) == DLSVM_OK);
  std::string desc = take(text);
  CHECK(desc.find("samples 32") != std::string::npos);
  CHECK(desc.find("classes 2") != std::string::npos);
}

TEST_CASE("dataset containers round-trip through the c api") {
  DatasetFixture fx;
  std::string p1 = fx.tmp.str("one.ds"), p2 = fx.tmp.str("two.ds");
  REQUIRE(dlsvm_dataset_save(fx.ds, p1.c_str()) == DLSVM_OK);

  dlsvm_dataset* back = nullptr;
  REQUIRE(dlsvm_dataset_open(p1.c_str(), &back) == DLSVM_OK);
  CHECK(dlsvm_dataset_samples(back) == 32);
  CHECK(dlsvm_dataset_split_size(back, 0) == 24);
  REQUIRE(dlsvm_dataset_save(back, p2.c_str()) == DLSVM_OK);
  CHECK(slurp(p1) == slurp(p2));
  dlsvm_dataset_free(back);
}

TEST_CASE("training writes a reproducible step log and a working model") {
  DatasetFixture fx;
  std::string log = fx.tmp.str("steps.csv");
  dlsvm_model* model = train_tiny_mlp(fx.ds, log.c_str());

  CHECK(std::string(dlsvm_model_kind(model)) == "mlp-svm");
  CHECK(dlsvm_model_classes(model) == 2);
  CHECK(std::string(dlsvm_model_class_name(model, 0)) == "dark");
  CHECK(dlsvm_model_class_name(model, 5) == nullptr);

  std::string lines = slurp(log);
  CHECK(lines.rfind("step,epoch,loss,batch_accuracy,wall_ms\n", 0) == 0);
  // 24 train rows / batch 8 = 3 steps per epoch, 2 epochs
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 7);
  CHECK(lines.find("\n6,2,") != std::string::npos);

  std::string saved = fx.tmp.str("model.ckpt");
  REQUIRE(dlsvm_model_save(model, saved.c_str()) == DLSVM_OK);
  dlsvm_model* back = nullptr;
  REQUIRE(dlsvm_model_open(saved.c_str(), &back) == DLSVM_OK);
  CHECK(std::string(dlsvm_model_kind(back)) == "mlp-svm");
  CHECK(dlsvm_model_classes(back) == 2);
  dlsvm_model_free(back);
  dlsvm_model_free(model);
}

TEST_CASE("the step callback sees every step in order") {
  DatasetFixture fx;
  dlsvm_train_options opt;
  REQUIRE(dlsvm_train_options_init(&opt, "mlp") == DLSVM_OK);
  opt.batch = 8;
  opt.epochs = 2;
  opt.seed = 5;
  struct Trace {
    std::vector<size_t> steps, epochs;
  } trace;
  opt.on_step = [](void* user, size_t step, size_t epoch, double loss, double acc) {
    auto* t = static_cast<Trace*>(user);
    t->steps.push_back(step);
    t->epochs.push_back(epoch);
    (void)loss;
    (void)acc;
  };
  opt.user = &trace;
  dlsvm_model* model = nullptr;
  REQUIRE(dlsvm_train(fx.ds, &opt, &model) == DLSVM_OK);
  CHECK(trace.steps == std::vector<size_t>{1, 2, 3, 4, 5, 6});
  CHECK(trace.epochs == std::vector<size_t>{1, 1, 1, 2, 2, 2});
  dlsvm_model_free(model);
}

TEST_CASE("evaluation over a split produces a coherent report") {
  DatasetFixture fx;
  dlsvm_model* model = train_tiny_mlp(fx.ds);

  dlsvm_report* rep = nullptr;
  REQUIRE(dlsvm_evaluate(model, fx.ds, 1, &rep) == DLSVM_OK);
  CHECK(dlsvm_report_total(rep) == 8);
  CHECK(dlsvm_report_classes(rep) == 2);

  size_t diag = 0, all = 0;
  for (size_t t = 0; t < 2; ++t)
    for (size_t p = 0; p < 2; ++p) {
      size_t c = dlsvm_report_confusion(rep, t, p);
      all += c;
      if (t == p) diag += c;
    }
  CHECK(all == 8);
  CHECK(dlsvm_report_accuracy(rep) == doctest::Approx(double(diag) / 8.0));

  for (size_t c = 0; c < 2; ++c)
    for (int what = 0; what < 3; ++what) {
      double v = dlsvm_report_class_metric(rep, c, what);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  double support0 = dlsvm_report_class_metric(rep, 0, 3);
  double support1 = dlsvm_report_class_metric(rep, 1, 3);
  CHECK(support0 + support1 == 8.0);

  char* text = nullptr;
  REQUIRE(dlsvm_report_render(rep, 0, &text) == DLSVM_OK);
  std::string table = take(text);
  CHECK(table.find("dark") != std::string::npos);
  CHECK(table.find("accuracy") != std::string::npos);

  char* csv = nullptr;
  REQUIRE(dlsvm_report_render(rep, 1, &csv) == DLSVM_OK);
  CHECK(take(csv).rfind("name,support,precision,recall,f1\n", 0) == 0);

  char* conf = nullptr;
  REQUIRE(dlsvm_report_render(rep, 2, &conf) == DLSVM_OK);
  CHECK(take(conf).rfind("true\\predicted,dark,light\n", 0) == 0);

  char* svg = nullptr;
  REQUIRE(dlsvm_report_render(rep, 3, &svg) == DLSVM_OK);
  CHECK(take(svg).rfind("<svg", 0) == 0);

  char* bad = nullptr;
  CHECK(dlsvm_report_render(rep, 9, &bad) == DLSVM_ERR_CONFIG);
  CHECK(bad == nullptr);

  // split 3 scores every sample
  dlsvm_report* whole = nullptr;
  REQUIRE(dlsvm_evaluate(model, fx.ds, 3, &whole) == DLSVM_OK);
  CHECK(dlsvm_report_total(whole) == 32);
  dlsvm_report_free(whole);

  dlsvm_report_free(rep);
  dlsvm_model_free(model);
}

TEST_CASE("single files classify through the standardization pipeline") {
  DatasetFixture fx;
  dlsvm_model* model = train_tiny_mlp(fx.ds);

  size_t label = 99;
  std::vector<double> scores(dlsvm_model_classes(model));
  std::string sample = (fx.tmp.path / "root" / "dark" / "d00.pgm").string();
  REQUIRE(dlsvm_predict_file(model, sample.c_str(), &label, scores.data()) == DLSVM_OK);
  CHECK(label < 2);
  for (double s : scores) CHECK(std::isfinite(s));

  // raw (non-image) bytes go through the binary renderer instead
  std::string raw = fx.tmp.str("blob.bin");
  {
    std::ofstream out(raw, std::ios::binary);
    for (int i = 0; i < 2000; ++i) out.put(char(i % 251));
  }
  size_t raw_label = 99;
  REQUIRE(dlsvm_predict_file(model, raw.c_str(), &raw_label, nullptr) == DLSVM_OK);
  CHECK(raw_label < 2);

  dlsvm_model_free(model);
}

TEST_CASE("render_binary writes the ladder-width pgm and drops the tail") {
  TempDir tmp("render");
  std::string in = tmp.str("sample.bin");
  {
    std::ofstream out(in, std::ios::binary);
    for (int i = 0; i < 100; ++i) out.put(char(i));
  }
  std::string outp = tmp.str("sample.pgm");
  REQUIRE(dlsvm_render_binary(in.c_str(), outp.c_str(), 32) == DLSVM_OK);
  dlsvm::GrayImage img = dlsvm::read_gray_image(outp);
  CHECK(img.w == 32);
  CHECK(img.h == 3);
  for (size_t i = 0; i < img.pixels.size(); ++i) CHECK(img.pixels[i] == uint8_t(i));

  CHECK(dlsvm_render_binary(tmp.str("missing.bin").c_str(), outp.c_str(), 0) ==
        DLSVM_ERR_INPUT);
}

TEST_CASE("failures set a status code and a descriptive message") {
  dlsvm_dataset* ds = nullptr;
  CHECK(dlsvm_dataset_open("/nonexistent/path.ds", &ds) == DLSVM_ERR_INPUT);
  CHECK(ds == nullptr);
  CHECK(std::strlen(dlsvm_last_error()) > 0);

  CHECK(dlsvm_dataset_open(nullptr, &ds) == DLSVM_ERR_INPUT);
  CHECK(dlsvm_dataset_build(nullptr, 0.7, 8, 1, 0, &ds) == DLSVM_ERR_INPUT);

  TempDir tmp("badargs");
  write_image_tree(tmp.path / "root");
  CHECK(dlsvm_dataset_build((tmp.path / "root").string().c_str(), 1.5, 8, 1, 0, &ds) ==
        DLSVM_ERR_CONFIG);
  CHECK(ds == nullptr);

  dlsvm_train_options opt;
  CHECK(dlsvm_train_options_init(&opt, "resnet") == DLSVM_ERR_CONFIG);
  CHECK(dlsvm_train_options_init(nullptr, "mlp") == DLSVM_ERR_INPUT);

  dlsvm_model* model = nullptr;
  CHECK(dlsvm_model_open("/nonexistent/model.ckpt", &model) == DLSVM_ERR_INPUT);
  CHECK(model == nullptr);
}

TEST_CASE("options init fills the per-architecture defaults") {
  dlsvm_train_options cnn;
  REQUIRE(dlsvm_train_options_init(&cnn, "cnn-svm") == DLSVM_OK);
  CHECK(cnn.svm_c == 10.0);
  CHECK(cnn.keep_prob == 0.85);
  CHECK(cnn.batch == 256);
  CHECK(cnn.epochs == 100);
  CHECK(cnn.lr == 1e-3);
  CHECK(std::string(cnn.reduction) == "sum");
  CHECK(cnn.log_path == nullptr);
  CHECK(cnn.on_step == nullptr);

  dlsvm_train_options mlp;
  REQUIRE(dlsvm_train_options_init(&mlp, "mlp-svm") == DLSVM_OK);
  CHECK(mlp.svm_c == 0.5);
  CHECK(mlp.keep_prob == 1.0);
}

TEST_CASE("gradcheck through the c api passes for the mlp") {
  int pass = 0;
  char* report = nullptr;
  REQUIRE(dlsvm_gradcheck("mlp-svm", 3, 1e-5, 1e-4, &pass, &report) == DLSVM_OK);
  CHECK(pass == 1);
  std::string text = take(report);
  CHECK(text.find("PASS") != std::string::npos);

  CHECK(dlsvm_gradcheck("unknown", 3, 1e-5, 1e-4, &pass, nullptr) == DLSVM_ERR_CONFIG);
}
