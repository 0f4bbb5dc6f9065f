#pragma once

#include <string>
#include <vector>

#include "core/model.hpp"

namespace dlsvm {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0;
  size_t elements = 0;
};

struct GradCheckReport {
  std::string model;
  double max_rel_err = 0;
  double eps = 0, threshold = 0;
  bool pass = false;
  std::vector<GradCheckEntry> entries;
};

// Scaled-down spec of the given architecture, small enough to sweep every
// parameter element with central differences in double precision.
ModelSpec gradcheck_spec(ModelKind kind, uint64_t seed);

// Compares the analytic gradient of the training loss against central
// differences on a random batch, element by element. Relative error uses
// |a - n| / max(1, |a|, |n|).
GradCheckReport gradcheck_run(const ModelSpec& spec, double eps = 1e-5,
                              double threshold = 1e-4);

GradCheckReport gradcheck_model(ModelKind kind, uint64_t seed, double eps = 1e-5,
                                double threshold = 1e-4);

std::string gradcheck_text(const GradCheckReport& r);

}  // namespace dlsvm
