#include "core/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "core/errors.hpp"

namespace dlsvm {

const char* const kStepLogHeader = "step,epoch,loss,batch_accuracy,wall_ms";

std::string step_log_line(const StepRecord& rec) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%.9g,%.9g,%.3f", rec.step, rec.epoch, rec.loss,
                rec.accuracy, rec.wall_ms);
  return buf;
}

TrainResult train_model(Model<float>& model, const Tensor& features,
                        const std::vector<int>& labels, Adam<float>& opt,
                        const StepSink& sink, bool timing) {
  if (features.rank() != 2) throw_dimension("train: features must be {n, d}");
  size_t n = features.shape()[0];
  size_t d = features.shape()[1];
  if (labels.size() != n) throw_dimension("train: labels do not match feature rows");
  if (d != model.spec.input_dim) throw_dimension("train: feature width does not match model");
  size_t batch = model.spec.batch;
  size_t steps_per_epoch = n / batch;
  if (steps_per_epoch == 0) throw_input("train: set has fewer samples than one batch");
  for (int y : labels)
    if (y < 0 || size_t(y) >= model.spec.classes) throw_input("train: label out of range");

  std::vector<ParamRef<float>> params = model.parameters();
  std::vector<size_t> order(n);
  Tensor bx({batch, d});
  std::vector<int> by(batch);

  TrainResult result;
  size_t step = 0;
  for (size_t epoch = 1; epoch <= model.spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t(0));
    Rng shuffle_rng = Rng::stream(model.spec.seed, "shuffle", epoch);
    shuffle_rng.shuffle(order);
    for (size_t b = 0; b < steps_per_epoch; ++b) {
      auto started = std::chrono::steady_clock::now();
      for (size_t i = 0; i < batch; ++i) {
        size_t src = order[b * batch + i];
        std::copy(features.data() + src * d, features.data() + (src + 1) * d,
                  bx.data() + i * d);
        by[i] = labels[src];
      }
      model.zero_grads();
      auto stats = model.loss_and_backward(bx, by);
      ++step;
      if (!std::isfinite(stats.loss))
        throw_numeric("training diverged at step " + std::to_string(step) + " (epoch " +
                      std::to_string(epoch) + "): non-finite loss from " +
                      model.nonfinite_layer());
      opt.step(params);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.loss = stats.loss;
      rec.accuracy = stats.accuracy;
      if (timing) {
        auto ended = std::chrono::steady_clock::now();
        rec.wall_ms = std::chrono::duration<double, std::milli>(ended - started).count();
      }
      if (sink) sink(rec);
      result.final_loss = stats.loss;
      result.final_accuracy = stats.accuracy;
    }
  }
  result.steps = step;
  return result;
}

}  // namespace dlsvm
