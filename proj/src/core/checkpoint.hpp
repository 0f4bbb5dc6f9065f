#pragma once

#include <string>
#include <vector>

#include "core/adam.hpp"
#include "core/model.hpp"

namespace dlsvm {

// A checkpoint carries the full model spec, class names, the feature
// standardization fitted at dataset build time, every parameter tensor, and
// the optimizer state, so training can resume and inference can standardize
// fresh inputs. Writing the same state twice produces identical bytes.
void save_checkpoint(const std::string& path, Model<float>& model, const Adam<float>* opt,
                     const std::vector<std::string>& class_names,
                     const std::vector<double>& mean, const std::vector<double>& stddev);

struct LoadedCheckpoint {
  Model<float> model;
  std::vector<std::string> class_names;
  std::vector<double> mean, stddev;
  uint64_t adam_steps = 0;
  std::vector<Tensor> adam_m, adam_v;  // parallel to model.parameters()
  bool has_adam = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dlsvm
