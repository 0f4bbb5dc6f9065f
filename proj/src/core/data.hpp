#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/image_io.hpp"
#include "core/tensor.hpp"

namespace dlsvm {

// Width of the rendered image for a raw binary of this size, following the
// usual malware-visualization ladder.
size_t width_for_file_size(size_t bytes);

// Lays the bytes out row-major as 8-bit gray, one byte per pixel; a
// trailing partial row is discarded. width == 0 picks from the size ladder.
GrayImage bytes_to_image(const std::vector<uint8_t>& bytes, size_t width = 0);

// Corner-aligned bilinear resample to out_h x out_w, returned as floats on
// the source 0..255 scale.
std::vector<float> resize_bilinear(const GrayImage& img, size_t out_h, size_t out_w);

// Per-feature standardization to zero mean / unit variance (population
// variance; features with near-zero spread pass through shifted only).
struct Standardizer {
  std::vector<double> mean, stddev;
  void fit(const Tensor& x, const std::vector<uint32_t>& rows);
  void apply(Tensor& x) const;
};

struct RawDataset {
  std::vector<std::string> class_names;
  Tensor features;                    // {n, d}, raw pixel scale
  std::vector<uint8_t> labels;        // n, index into class_names
  std::vector<std::string> warnings;  // files skipped as undecodable
};

// Loads <root>/<class>/<image> with classes and files in byte-lexicographic
// order, resampling every image to out_h x out_w. Undecodable images are
// skipped with a warning; a class with nothing usable is an error.
RawDataset load_image_tree(const std::string& root, size_t out_h = 32, size_t out_w = 32);

struct SplitIndices {
  std::vector<uint32_t> train, test, holdout;
};

// Shuffled train/test split with both parts truncated to full batches; the
// truncated leftovers land in holdout. Same n/seed/batch always gives the
// same indices.
SplitIndices split_indices(size_t n, double train_frac, size_t batch, uint64_t seed);

struct Dataset {
  std::vector<std::string> class_names;
  Tensor features;  // {n, d}, standardized
  std::vector<uint8_t> labels;
  SplitIndices split;
  std::vector<double> mean, stddev;
  uint64_t seed = 0;
  size_t batch = 0;
  bool fit_on_all = false;

  size_t samples() const { return labels.size(); }
  size_t dim() const { return features.rank() == 2 ? features.shape()[1] : 0; }
  size_t classes() const { return class_names.size(); }
};

Dataset build_dataset(RawDataset raw, double train_frac, size_t batch, uint64_t seed,
                      bool fit_on_all = false);

// Container round-trip; saving the same dataset twice yields identical bytes.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

std::string dataset_summary(const Dataset& ds);

Tensor gather_rows(const Tensor& features, const std::vector<uint32_t>& rows);
std::vector<int> gather_labels(const std::vector<uint8_t>& labels,
                               const std::vector<uint32_t>& rows);

}  // namespace dlsvm
