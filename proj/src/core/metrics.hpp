#pragma once

#include <string>
#include <vector>

namespace dlsvm {

struct ClassMetrics {
  size_t support = 0;        // true instances of the class
  size_t predicted = 0;      // rows assigned to the class
  double precision = 0, recall = 0, f1 = 0;
  bool precision_defined = true;  // false when nothing was predicted as this class
  bool recall_defined = true;     // false when the class has no true instances
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<size_t> confusion;  // K*K, row = true class, column = predicted
  std::vector<ClassMetrics> per_class;
  size_t total = 0;
  double accuracy = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;

  size_t classes() const { return class_names.size(); }
  size_t at(size_t t, size_t p) const { return confusion[t * classes() + p]; }
};

// Builds the full report from parallel truth/prediction vectors. Undefined
// ratios (empty row or column) count as zero in the aggregates and are
// flagged per class.
EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted,
                    std::vector<std::string> class_names);

std::string report_csv(const EvalReport& r);
std::string report_text(const EvalReport& r);
std::string confusion_csv(const EvalReport& r);

// Self-contained SVG heatmap of the row-normalized confusion matrix.
std::string confusion_svg(const EvalReport& r);

}  // namespace dlsvm
