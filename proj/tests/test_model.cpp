#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/gradcheck.hpp"
#include "core/model.hpp"
#include "core/rng.hpp"
#include "core/train.hpp"

using namespace dlsvm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag) {
    path = fs::temp_directory_path() / (std::string("dlsvm_model_") + tag);
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

void spit(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

ModelSpec tiny_mlp_spec() {
  ModelSpec spec = defaults_for(ModelKind::MlpSvm);
  spec.classes = 3;
  spec.input_dim = 8;
  spec.mlp_hidden = {6};
  spec.batch = 4;
  spec.epochs = 1;
  spec.seed = 7;
  return spec;
}

struct Blobs {
  Tensor x;
  std::vector<int> y;
};

Blobs make_blobs(size_t n, size_t d, size_t k, uint64_t seed, double spread, double noise) {
  Rng rng(seed);
  std::vector<double> centers(k * d);
  for (auto& c : centers) c = rng.uniform(-spread, spread);
  Blobs out;
  out.x = Tensor({n, d});
  out.y.resize(n);
  for (size_t i = 0; i < n; ++i) {
    size_t c = i % k;
    out.y[i] = int(c);
    for (size_t j = 0; j < d; ++j)
      out.x[i * d + j] = float(centers[c * d + j] + rng.normal() * noise);
  }
  return out;
}

const ParamRef<float>* find_param(const std::vector<ParamRef<float>>& params,
                                  const std::string& name) {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace

TEST_CASE("model kind names round-trip and aliases resolve") {
  CHECK(std::string(model_kind_name(ModelKind::CnnSvm)) == "cnn-svm");
  CHECK(model_kind_from_name("cnn-svm") == ModelKind::CnnSvm);
  CHECK(model_kind_from_name("cnn") == ModelKind::CnnSvm);
  CHECK(model_kind_from_name("gru") == ModelKind::GruSvm);
  CHECK(model_kind_from_name("mlp-svm") == ModelKind::MlpSvm);
  CHECK_THROWS_AS(model_kind_from_name("transformer"), Error);
}

TEST_CASE("per-architecture presets carry the published penalties and dropout") {
  ModelSpec cnn = defaults_for(ModelKind::CnnSvm);
  CHECK(cnn.svm_c == 10.0);
  CHECK(cnn.keep_prob == 0.85);
  CHECK(cnn.cnn_filters == std::vector<size_t>{36, 72});
  CHECK(cnn.cnn_kernel == 5);
  CHECK(cnn.cnn_dense == 1024);

  ModelSpec gru = defaults_for(ModelKind::GruSvm);
  CHECK(gru.svm_c == 10.0);
  CHECK(gru.keep_prob == 0.85);
  CHECK(gru.gru_layers == 5);
  CHECK(gru.gru_hidden == 256);

  ModelSpec mlp = defaults_for(ModelKind::MlpSvm);
  CHECK(mlp.svm_c == 0.5);
  CHECK(mlp.keep_prob == 1.0);
  CHECK(mlp.mlp_hidden == std::vector<size_t>{512, 256, 128});

  for (ModelKind k : {ModelKind::CnnSvm, ModelKind::GruSvm, ModelKind::MlpSvm}) {
    ModelSpec s = defaults_for(k);
    CHECK(s.batch == 256);
    CHECK(s.epochs == 100);
    CHECK(s.lr == 1e-3);
    CHECK(s.classes == 25);
    CHECK(s.input_dim == 1024);
  }
}

TEST_CASE("default cnn assembles the published parameter shapes") {
  Model<float> m = build_model<float>(defaults_for(ModelKind::CnnSvm));
  auto params = m.parameters();
  REQUIRE(params.size() == 8);

  const ParamRef<float>* p = find_param(params, "conv1.k");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{5, 5, 1, 36});
  p = find_param(params, "conv1.b");
  REQUIRE(p != nullptr);
  CHECK(p->value->size() == 36);
  p = find_param(params, "conv2.k");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{5, 5, 36, 72});
  p = find_param(params, "dense1.w");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{4608, 1024});  // 8*8*72 after two pools
  p = find_param(params, "dense1.b");
  REQUIRE(p != nullptr);
  CHECK(p->value->size() == 1024);
  p = find_param(params, "head.w");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{25, 1024});
  p = find_param(params, "head.b");
  REQUIRE(p != nullptr);
  CHECK(p->value->size() == 25);
}

TEST_CASE("default gru and mlp assemble the published parameter sets") {
  Model<float> gru = build_model<float>(defaults_for(ModelKind::GruSvm));
  auto gp = gru.parameters();
  CHECK(gp.size() == 5 * 6 + 2);
  const ParamRef<float>* p = find_param(gp, "gru.l0.wz");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{32 + 256, 256});
  p = find_param(gp, "gru.l1.wz");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{256 + 256, 256});
  p = find_param(gp, "head.w");
  REQUIRE(p != nullptr);
  CHECK(p->value->shape() == std::vector<size_t>{25, 256});

  Model<float> mlp = build_model<float>(defaults_for(ModelKind::MlpSvm));
  auto mp = mlp.parameters();
  REQUIRE(mp.size() == 8);
  CHECK(mp[0].name == "dense1.w");
  CHECK(mp[0].value->shape() == std::vector<size_t>{1024, 512});
  CHECK(mp[2].name == "dense2.w");
  CHECK(mp[2].value->shape() == std::vector<size_t>{512, 256});
  CHECK(mp[4].name == "dense3.w");
  CHECK(mp[4].value->shape() == std::vector<size_t>{256, 128});
  CHECK(mp[6].name == "head.w");
  CHECK(mp[6].value->shape() == std::vector<size_t>{25, 128});
}

TEST_CASE("zero input through an mlp yields exactly zero scores") {
  Model<float> m = build_model<float>(defaults_for(ModelKind::MlpSvm));
  Tensor x({2, 1024}, 0.0f);
  Tensor s = m.scores(x, Mode::Infer);
  REQUIRE(s.shape() == std::vector<size_t>{2, 25});
  for (float v : s.vec()) CHECK(v == 0.0f);  // biases start at zero everywhere
}

TEST_CASE("two builds of the same spec are bitwise identical, dropout included") {
  ModelSpec spec = tiny_mlp_spec();
  spec.keep_prob = 0.6;
  Model<float> a = build_model<float>(spec);
  Model<float> b = build_model<float>(spec);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(pa[i].value->vec() == pb[i].value->vec());
  }
}

TEST_CASE("spec validation rejects out-of-range values") {
  ModelSpec s = tiny_mlp_spec();
  s.classes = 1;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.batch = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.epochs = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.keep_prob = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.keep_prob = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.svm_c = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = tiny_mlp_spec();
  s.mlp_hidden = {};
  CHECK_THROWS_AS(s.validate(), Error);

  ModelSpec cnn = defaults_for(ModelKind::CnnSvm);
  cnn.input_dim = 999;  // does not match 32*32*1
  CHECK_THROWS_AS(build_model<float>(cnn), Error);
  ModelSpec gru = defaults_for(ModelKind::GruSvm);
  gru.input_dim = 999;
  CHECK_THROWS_AS(build_model<float>(gru), Error);
}

TEST_CASE("training visits every batch with 1-based step and epoch counters") {
  ModelSpec spec = tiny_mlp_spec();
  spec.input_dim = 4;
  spec.mlp_hidden = {8};
  spec.classes = 2;
  spec.batch = 256;
  spec.epochs = 3;
  Model<float> m = build_model<float>(spec);

  Rng rng(71);
  Tensor x({512, 4});
  for (auto& v : x.vec()) v = float(rng.uniform(-1, 1));
  std::vector<int> y(512);
  for (auto& v : y) v = int(rng.next_below(2));

  Adam<float> opt(AdamConfig{spec.lr, 0.9, 0.999, 1e-8}, m.parameters());
  std::vector<StepRecord> records;
  TrainResult res = train_model(m, x, y, opt, [&](const StepRecord& r) { records.push_back(r); });

  CHECK(res.steps == 6);
  REQUIRE(records.size() == 6);
  const size_t want_epoch[6] = {1, 1, 2, 2, 3, 3};
  for (size_t i = 0; i < 6; ++i) {
    CHECK(records[i].step == i + 1);
    CHECK(records[i].epoch == want_epoch[i]);
    CHECK(records[i].wall_ms == 0.0);  // timing off keeps logs reproducible
  }
  CHECK(res.final_loss == records.back().loss);
}

TEST_CASE("a zero learning rate leaves every parameter untouched") {
  ModelSpec spec = tiny_mlp_spec();
  spec.epochs = 2;
  spec.lr = 0.0;
  Model<float> m = build_model<float>(spec);
  std::vector<std::vector<float>> before;
  for (const auto& p : m.parameters()) before.push_back(p.value->vec());

  Rng rng(72);
  Tensor x({8, 8});
  for (auto& v : x.vec()) v = float(rng.uniform(-1, 1));
  std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1};
  Adam<float> opt(AdamConfig{0.0, 0.9, 0.999, 1e-8}, m.parameters());
  train_model(m, x, y, opt);

  auto params = m.parameters();
  for (size_t i = 0; i < params.size(); ++i) CHECK(params[i].value->vec() == before[i]);
}

TEST_CASE("train_model validates features, labels, and batch size") {
  ModelSpec spec = tiny_mlp_spec();
  Model<float> m = build_model<float>(spec);
  Adam<float> opt(AdamConfig{}, m.parameters());
  Tensor x({8, 8}, 0.5f);
  std::vector<int> y(8, 0);

  std::vector<int> short_y(4, 0);
  CHECK_THROWS_AS(train_model(m, x, short_y, opt), Error);
  Tensor narrow({8, 5}, 0.5f);
  CHECK_THROWS_AS(train_model(m, narrow, y, opt), Error);
  std::vector<int> bad_y(8, 9);
  CHECK_THROWS_AS(train_model(m, x, bad_y, opt), Error);
  Tensor few({2, 8}, 0.5f);
  std::vector<int> few_y(2, 0);
  CHECK_THROWS_AS(train_model(m, few, few_y, opt), Error);  // fewer rows than one batch
}

TEST_CASE("an mlp separates gaussian blobs and the loss trends down") {
  ModelSpec spec = defaults_for(ModelKind::MlpSvm);
  spec.classes = 3;
  spec.input_dim = 16;
  spec.mlp_hidden = {32, 16};
  spec.batch = 50;
  spec.epochs = 25;
  spec.lr = 0.01;
  spec.seed = 11;
  Model<float> m = build_model<float>(spec);

  Blobs data = make_blobs(300, 16, 3, 73, 3.0, 0.3);
  Adam<float> opt(AdamConfig{spec.lr, 0.9, 0.999, 1e-8}, m.parameters());
  std::vector<double> losses;
  TrainResult res =
      train_model(m, data.x, data.y, opt, [&](const StepRecord& r) { losses.push_back(r.loss); });
  CHECK(res.steps == 150);

  double head = 0, tail = 0;
  for (size_t i = 0; i < 10; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 1 - i];
  }
  CHECK(tail < head);

  std::vector<int> pred = m.predict(data.x);
  size_t hits = 0;
  for (size_t i = 0; i < pred.size(); ++i) hits += (pred[i] == data.y[i]);
  CHECK(double(hits) / double(pred.size()) >= 0.99);
}

TEST_CASE("prediction is deterministic and chunking does not change it") {
  ModelSpec spec = tiny_mlp_spec();
  Model<float> m = build_model<float>(spec);
  Rng rng(74);
  Tensor x({10, 8});
  for (auto& v : x.vec()) v = float(rng.uniform(-1, 1));

  Tensor s1 = m.scores(x, Mode::Infer);
  Tensor s2 = m.scores(x, Mode::Infer);
  CHECK(s1.vec() == s2.vec());

  std::vector<int> whole = m.predict(x);
  CHECK(predict_batched(m, x, 3) == whole);
  CHECK(predict_batched(m, x, 5) == whole);
}

TEST_CASE("checkpoints round-trip bitwise and reproduce the forward pass") {
  TempDir tmp("ckpt");
  ModelSpec spec = tiny_mlp_spec();
  Model<float> m = build_model<float>(spec);
  std::vector<std::string> names = {"ant", "bee", "cat"};
  std::vector<double> mean(spec.input_dim, 0.25), stddev(spec.input_dim, 2.0);

  // a couple of optimizer steps so the moment tensors are nontrivial
  Rng rng(75);
  Tensor bx({4, 8});
  for (auto& v : bx.vec()) v = float(rng.uniform(-1, 1));
  std::vector<int> by = {0, 1, 2, 1};
  auto params = m.parameters();
  Adam<float> opt(AdamConfig{1e-3, 0.9, 0.999, 1e-8}, params);
  for (int i = 0; i < 2; ++i) {
    m.zero_grads();
    m.loss_and_backward(bx, by);
    opt.step(params);
  }

  std::string p1 = tmp.str("a.ckpt");
  save_checkpoint(p1, m, &opt, names, mean, stddev);
  LoadedCheckpoint lc = load_checkpoint(p1);

  CHECK(lc.class_names == names);
  CHECK(lc.mean == mean);
  CHECK(lc.stddev == stddev);
  CHECK(lc.model.spec.kind == spec.kind);
  CHECK(lc.model.spec.seed == spec.seed);
  CHECK(lc.model.spec.mlp_hidden == spec.mlp_hidden);
  CHECK(lc.has_adam);
  CHECK(lc.adam_steps == 2);

  auto lp = lc.model.parameters();
  REQUIRE(lp.size() == params.size());
  for (size_t i = 0; i < lp.size(); ++i) {
    CHECK(lp[i].name == params[i].name);
    CHECK(lp[i].value->vec() == params[i].value->vec());
  }
  REQUIRE(lc.adam_m.size() == params.size());
  for (size_t i = 0; i < lc.adam_m.size(); ++i) {
    CHECK(lc.adam_m[i].vec() == opt.moments_m(i).vec());
    CHECK(lc.adam_v[i].vec() == opt.moments_v(i).vec());
  }

  // identical forward pass on fresh inputs
  Tensor probe({100, 8});
  for (auto& v : probe.vec()) v = float(rng.uniform(-2, 2));
  Tensor s_orig = m.scores(probe, Mode::Infer);
  Tensor s_load = lc.model.scores(probe, Mode::Infer);
  CHECK(s_orig.vec() == s_load.vec());

  // saving the loaded state reproduces the file byte for byte
  Adam<float> opt2(AdamConfig{1e-3, 0.9, 0.999, 1e-8}, lp);
  opt2.restore(static_cast<long long>(lc.adam_steps), lc.adam_m, lc.adam_v);
  std::string p2 = tmp.str("b.ckpt");
  save_checkpoint(p2, lc.model, &opt2, lc.class_names, lc.mean, lc.stddev);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("corrupt checkpoints are format errors") {
  TempDir tmp("ckpt_bad");
  ModelSpec spec = tiny_mlp_spec();
  Model<float> m = build_model<float>(spec);
  std::vector<double> mean(8, 0.0), stddev(8, 1.0);
  std::string good = tmp.str("good.ckpt");
  save_checkpoint(good, m, nullptr, {"a", "b", "c"}, mean, stddev);
  std::string bytes = slurp(good);

  std::string truncated = tmp.str("short.ckpt");
  spit(truncated, bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_AS(load_checkpoint(truncated), Error);
  try {
    load_checkpoint(truncated);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Format);
  }

  std::string magic = tmp.str("magic.ckpt");
  std::string mutated = bytes;
  mutated[0] = 'X';
  spit(magic, mutated);
  CHECK_THROWS_AS(load_checkpoint(magic), Error);

  LoadedCheckpoint lc = load_checkpoint(good);
  CHECK_FALSE(lc.has_adam);
  CHECK(lc.adam_steps == 0);
}

TEST_CASE("optimizer state in a checkpoint resumes training bit-for-bit") {
  TempDir tmp("resume");
  ModelSpec spec = tiny_mlp_spec();
  Rng rng(76);
  Tensor bx({4, 8});
  for (auto& v : bx.vec()) v = float(rng.uniform(-1, 1));
  std::vector<int> by = {2, 0, 1, 1};
  const AdamConfig cfg{1e-3, 0.9, 0.999, 1e-8};

  auto run_steps = [&](Model<float>& model, Adam<float>& opt,
                       const std::vector<ParamRef<float>>& params, int steps) {
    for (int i = 0; i < steps; ++i) {
      model.zero_grads();
      model.loss_and_backward(bx, by);
      opt.step(params);
    }
  };

  // reference: five uninterrupted steps
  Model<float> straight = build_model<float>(spec);
  auto sp = straight.parameters();
  Adam<float> sopt(cfg, sp);
  run_steps(straight, sopt, sp, 5);

  // two steps, a save/load round trip, then three more
  Model<float> first = build_model<float>(spec);
  auto fp = first.parameters();
  Adam<float> fopt(cfg, fp);
  run_steps(first, fopt, fp, 2);
  std::string path = tmp.str("mid.ckpt");
  save_checkpoint(path, first, &fopt, {"a", "b", "c"}, std::vector<double>(8, 0.0),
                  std::vector<double>(8, 1.0));

  LoadedCheckpoint lc = load_checkpoint(path);
  auto rp = lc.model.parameters();
  Adam<float> ropt(cfg, rp);
  ropt.restore(static_cast<long long>(lc.adam_steps), lc.adam_m, lc.adam_v);
  run_steps(lc.model, ropt, rp, 3);

  for (size_t i = 0; i < sp.size(); ++i) {
    REQUIRE(sp[i].value->size() == rp[i].value->size());
    CHECK(std::memcmp(sp[i].value->data(), rp[i].value->data(),
                      sp[i].value->size() * sizeof(float)) == 0);
  }
}

TEST_CASE("step log lines follow the header layout") {
  CHECK(std::string(kStepLogHeader) == "step,epoch,loss,batch_accuracy,wall_ms");
  StepRecord rec;
  rec.step = 3;
  rec.epoch = 2;
  rec.loss = 1.5;
  rec.accuracy = 0.25;
  CHECK(step_log_line(rec) == "3,2,1.5,0.25,0.000");
}

TEST_CASE("analytic gradients pass the numeric sweep for all three architectures") {
  for (ModelKind kind : {ModelKind::MlpSvm, ModelKind::CnnSvm, ModelKind::GruSvm}) {
    GradCheckReport r = gradcheck_model(kind, 123);
    INFO("model ", model_kind_name(kind), " max_rel_err ", r.max_rel_err);
    CHECK(r.pass);
    CHECK(r.max_rel_err < 1e-4);
    CHECK_FALSE(r.entries.empty());
    std::string text = gradcheck_text(r);
    CHECK(text.find("PASS") != std::string::npos);
  }
}
