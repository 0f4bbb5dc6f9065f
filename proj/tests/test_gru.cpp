#include "doctest.h"

#include <cmath>
#include <vector>

#include "core/gru.hpp"
#include "core/rng.hpp"
#include "oracles.hpp"

using namespace dlsvm;

TEST_CASE("gru step with all-zero weights halves the previous hidden state") {
  // z = sigmoid(0) = 0.5, candidate = tanh(0) = 0, so h' = 0.5 * h.
  GruCell<double> cell(3, 2);
  TensorD h = TensorD::from_data({1, 2}, {0.8, -0.4});
  TensorD x({1, 3}, 1.0);
  GruStepOut<double> out = gru_step(cell, h, x);
  CHECK(out.h[0] == doctest::Approx(0.4));
  CHECK(out.h[1] == doctest::Approx(-0.2));
  CHECK(out.z[0] == doctest::Approx(0.5));
  CHECK(out.r[0] == doctest::Approx(0.5));
  CHECK(out.hc[0] == doctest::Approx(0.0));
}

TEST_CASE("update gate bias steers the cell between copy and overwrite") {
  GruCell<double> cell(2, 2);
  TensorD h = TensorD::from_data({1, 2}, {0.8, -0.6});
  TensorD x({1, 2}, 3.0);

  // z -> 0: the cell keeps its previous hidden state
  cell.bz.fill(-50.0);
  GruStepOut<double> keep = gru_step(cell, h, x);
  CHECK(std::fabs(keep.h[0] - 0.8) < 1e-15);
  CHECK(std::fabs(keep.h[1] + 0.6) < 1e-15);

  // z -> 1: the cell becomes the candidate (tanh(0) = 0 with zero weights)
  cell.bz.fill(50.0);
  GruStepOut<double> overwrite = gru_step(cell, h, x);
  CHECK(std::fabs(overwrite.h[0]) < 1e-15);
  CHECK(std::fabs(overwrite.h[1]) < 1e-15);
}

TEST_CASE("single-timestep stack equals one cell step from a zero state") {
  Rng rng(21);
  GruStackLayer<float> stack(1, 3, 4);
  stack.init(rng);
  Tensor x({2, 1, 3});
  for (auto& v : x.vec()) v = float(rng.uniform(-1, 1));

  Tensor from_stack = stack.forward(x, Mode::Infer);

  Tensor x_t({2, 3});
  for (size_t s = 0; s < 2; ++s)
    for (size_t j = 0; j < 3; ++j) x_t[s * 3 + j] = x[s * 3 + j];
  Tensor h0({2, 4}, 0.0f);
  GruStepOut<float> step = gru_step(stack.cells()[0], h0, x_t);
  REQUIRE(from_stack.size() == step.h.size());
  for (size_t i = 0; i < step.h.size(); ++i) CHECK(from_stack[i] == step.h[i]);
}

TEST_CASE("batch rows evolve independently") {
  Rng rng(22);
  GruStackLayer<float> stack(2, 3, 4);
  stack.init(rng);
  Tensor x({3, 5, 3});
  for (auto& v : x.vec()) v = float(rng.uniform(-2, 2));

  Tensor batched = stack.forward(x, Mode::Infer);
  for (size_t s = 0; s < 3; ++s) {
    Tensor one({1, 5, 3});
    std::copy(x.data() + s * 15, x.data() + (s + 1) * 15, one.data());
    Tensor h = stack.forward(one, Mode::Infer);
    for (size_t j = 0; j < 4; ++j) CHECK(h[j] == batched[s * 4 + j]);
  }
}

TEST_CASE("hidden states stay strictly inside (-1, 1) from a zero start") {
  Rng rng(23);
  GruStackLayer<float> stack(2, 4, 6);
  stack.init(rng);
  Tensor x({4, 12, 4});
  for (auto& v : x.vec()) v = float(rng.uniform(-10, 10));
  Tensor h = stack.forward(x, Mode::Infer);
  for (size_t i = 0; i < h.size(); ++i) CHECK(std::fabs(h[i]) < 1.0f);
}

TEST_CASE("stacked gru backward matches finite differences through time") {
  Rng rng(24);
  GruStackLayer<double> stack(2, 2, 3);
  stack.init(rng);
  TensorD x({2, 4, 2});
  for (auto& v : x.vec()) v = rng.uniform(-1, 1);
  TensorD weight({2, 3});
  for (auto& v : weight.vec()) v = rng.uniform(-1, 1);

  auto loss = [&]() {
    TensorD h = stack.forward(x, Mode::Infer);
    double s = 0;
    for (size_t i = 0; i < h.size(); ++i) s += h[i] * weight[i];
    return s;
  };

  stack.zero_grads();
  stack.forward(x, Mode::Train);
  TensorD dx = stack.backward(weight);

  std::vector<ParamRef<double>> params;
  stack.collect_params("gru", params);
  REQUIRE(params.size() == 12);  // 2 cells x (3 weight matrices + 3 biases)
  const double eps = 1e-6;
  for (auto& p : params) {
    for (size_t i = 0; i < p.value->size(); ++i) {
      double numeric = oracle::central_diff(loss, (*p.value)[i], eps);
      CHECK(oracle::rel_err((*p.grad)[i], numeric) < 1e-6);
    }
  }
  for (size_t i = 0; i < x.size(); ++i) {
    double numeric = oracle::central_diff(loss, x[i], eps);
    CHECK(oracle::rel_err(dx[i], numeric) < 1e-6);
  }
}

TEST_CASE("gru rejects malformed inputs") {
  GruStackLayer<float> stack(1, 3, 4);
  Tensor flat({2, 3});
  CHECK_THROWS_AS(stack.forward(flat, Mode::Infer), Error);
  Tensor wrong_feat({2, 5, 7});
  CHECK_THROWS_AS(stack.forward(wrong_feat, Mode::Infer), Error);
  CHECK_THROWS_AS(GruStackLayer<float>(0, 3, 4), Error);
}
