#pragma once

#include <functional>
#include <string>

#include "core/model.hpp"

namespace dlsvm {

struct StepRecord {
  size_t step = 0;   // 1-based, global
  size_t epoch = 0;  // 1-based
  double loss = 0;
  double accuracy = 0;  // on the step's batch
  double wall_ms = 0;   // 0 unless timing was requested
};

using StepSink = std::function<void(const StepRecord&)>;

struct TrainResult {
  size_t steps = 0;
  double final_loss = 0;
  double final_accuracy = 0;
};

extern const char* const kStepLogHeader;  // "step,epoch,loss,batch_accuracy,wall_ms"
std::string step_log_line(const StepRecord& rec);

// Runs model.spec.epochs passes over {features, labels} with a fresh shuffle
// per epoch (seeded from model.spec.seed, so reruns are identical). Batches
// beyond the last full one in an epoch are dropped. Timing is off by default
// to keep the step log byte-reproducible.
TrainResult train_model(Model<float>& model, const Tensor& features,
                        const std::vector<int>& labels, Adam<float>& opt,
                        const StepSink& sink = nullptr, bool timing = false);

}  // namespace dlsvm
