#include "core/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <numeric>

#include "core/errors.hpp"
#include "core/io_util.hpp"
#include "core/rng.hpp"

namespace fs = std::filesystem;

namespace dlsvm {

size_t width_for_file_size(size_t bytes) {
  size_t kib = bytes / 1024;
  if (kib < 10) return 32;
  if (kib < 30) return 64;
  if (kib < 60) return 128;
  if (kib < 100) return 256;
  if (kib < 200) return 384;
  if (kib < 500) return 512;
  if (kib < 1000) return 768;
  return 1024;
}

GrayImage bytes_to_image(const std::vector<uint8_t>& bytes, size_t width) {
  if (bytes.empty()) throw_input("cannot render an empty file");
  GrayImage img;
  img.w = width ? width : width_for_file_size(bytes.size());
  img.h = bytes.size() / img.w;
  if (img.h == 0) throw_input("file is smaller than one image row");
  img.pixels.assign(bytes.begin(), bytes.begin() + ptrdiff_t(img.h * img.w));
  return img;
}

std::vector<float> resize_bilinear(const GrayImage& img, size_t out_h, size_t out_w) {
  if (img.h == 0 || img.w == 0) throw_input("resize: empty image");
  if (out_h == 0 || out_w == 0) throw_input("resize: empty target");
  double sy = out_h > 1 ? double(img.h - 1) / double(out_h - 1) : 0.0;
  double sx = out_w > 1 ? double(img.w - 1) / double(out_w - 1) : 0.0;
  std::vector<float> out(out_h * out_w);
  for (size_t y = 0; y < out_h; ++y) {
    double fy = double(y) * sy;
    size_t y0 = size_t(fy);
    if (y0 >= img.h - 1) y0 = img.h - 1;
    size_t y1 = std::min(y0 + 1, img.h - 1);
    double wy = fy - double(y0);
    for (size_t x = 0; x < out_w; ++x) {
      double fx = double(x) * sx;
      size_t x0 = size_t(fx);
      if (x0 >= img.w - 1) x0 = img.w - 1;
      size_t x1 = std::min(x0 + 1, img.w - 1);
      double wx = fx - double(x0);
      double top = double(img.pixels[y0 * img.w + x0]) * (1 - wx) +
                   double(img.pixels[y0 * img.w + x1]) * wx;
      double bot = double(img.pixels[y1 * img.w + x0]) * (1 - wx) +
                   double(img.pixels[y1 * img.w + x1]) * wx;
      out[y * out_w + x] = float(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

void Standardizer::fit(const Tensor& x, const std::vector<uint32_t>& rows) {
  if (x.rank() != 2) throw_dimension("standardize: expected {n, d}");
  if (rows.empty()) throw_input("standardize: no rows to fit on");
  size_t d = x.shape()[1];
  mean.assign(d, 0.0);
  stddev.assign(d, 0.0);
  for (uint32_t r : rows) {
    const float* p = x.data() + size_t(r) * d;
    for (size_t j = 0; j < d; ++j) mean[j] += p[j];
  }
  for (size_t j = 0; j < d; ++j) mean[j] /= double(rows.size());
  for (uint32_t r : rows) {
    const float* p = x.data() + size_t(r) * d;
    for (size_t j = 0; j < d; ++j) {
      double dlt = p[j] - mean[j];
      stddev[j] += dlt * dlt;
    }
  }
  for (size_t j = 0; j < d; ++j) {
    stddev[j] = std::sqrt(stddev[j] / double(rows.size()));
    if (stddev[j] < 1e-8) stddev[j] = 1.0;
  }
}

void Standardizer::apply(Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != mean.size())
    throw_dimension("standardize: width does not match fitted statistics");
  size_t n = x.shape()[0], d = mean.size();
  for (size_t i = 0; i < n; ++i) {
    float* p = x.data() + i * d;
    for (size_t j = 0; j < d; ++j) p[j] = float((p[j] - mean[j]) / stddev[j]);
  }
}

namespace {

bool has_image_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".pgm";
}

}  // namespace

RawDataset load_image_tree(const std::string& root, size_t out_h, size_t out_w) {
  if (!fs::is_directory(root)) throw_input(root + " is not a directory");
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) throw_input(root + ": need at least two class directories");
  if (class_dirs.size() > 256) throw_input(root + ": more than 256 classes unsupported");

  RawDataset raw;
  raw.class_names = class_dirs;
  size_t d = out_h * out_w;
  std::vector<float> rows;
  for (size_t ci = 0; ci < class_dirs.size(); ++ci) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(root) / class_dirs[ci]))
      if (e.is_regular_file() && has_image_ext(e.path()))
        files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw_input(root + "/" + class_dirs[ci] + ": no .png or .pgm files");
    size_t usable = 0;
    for (const auto& f : files) {
      try {
        GrayImage img = read_gray_image(f);
        std::vector<float> row = resize_bilinear(img, out_h, out_w);
        rows.insert(rows.end(), row.begin(), row.end());
        raw.labels.push_back(uint8_t(ci));
        ++usable;
      } catch (const Error& e) {
        raw.warnings.push_back(std::string("skipped ") + f + ": " + e.what());
      }
    }
    if (usable == 0)
      throw_input(root + "/" + class_dirs[ci] + ": no decodable images");
  }
  raw.features = Tensor::from_data({raw.labels.size(), d}, std::move(rows));
  return raw;
}

SplitIndices split_indices(size_t n, double train_frac, size_t batch, uint64_t seed) {
  if (!(train_frac > 0.0) || !(train_frac < 1.0))
    throw_config("train fraction must be inside (0, 1)");
  if (batch < 1) throw_config("batch must be at least 1");
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng = Rng::stream(seed, "split");
  rng.shuffle(order);

  size_t raw_train = size_t(double(n) * train_frac);
  size_t raw_test = size_t(double(n) * (1.0 - train_frac));
  size_t train_n = raw_train - raw_train % batch;
  size_t test_n = raw_test - raw_test % batch;
  if (train_n == 0) throw_input("split leaves no full training batch");
  if (test_n == 0) throw_input("split leaves no full test batch");

  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + train_n);
  s.test.assign(order.begin() + raw_train, order.begin() + raw_train + test_n);
  s.holdout.assign(order.begin() + train_n, order.begin() + raw_train);
  s.holdout.insert(s.holdout.end(), order.begin() + raw_train + test_n, order.end());
  return s;
}

Dataset build_dataset(RawDataset raw, double train_frac, size_t batch, uint64_t seed,
                      bool fit_on_all) {
  Dataset ds;
  ds.class_names = std::move(raw.class_names);
  ds.features = std::move(raw.features);
  ds.labels = std::move(raw.labels);
  ds.seed = seed;
  ds.batch = batch;
  ds.fit_on_all = fit_on_all;
  ds.split = split_indices(ds.labels.size(), train_frac, batch, seed);

  Standardizer st;
  if (fit_on_all) {
    std::vector<uint32_t> all(ds.labels.size());
    std::iota(all.begin(), all.end(), 0u);
    st.fit(ds.features, all);
  } else {
    st.fit(ds.features, ds.split.train);
  }
  st.apply(ds.features);
  ds.mean = std::move(st.mean);
  ds.stddev = std::move(st.stddev);
  return ds;
}

namespace {

void put_indices(std::string& out, const char* name, const std::vector<uint32_t>& idx) {
  out += name;
  out += ' ';
  out += std::to_string(idx.size());
  for (uint32_t v : idx) {
    out += ' ';
    out += std::to_string(v);
  }
  out += '\n';
}

void put_doubles(std::string& out, const char* name, const std::vector<double>& v) {
  out += name;
  for (double x : v) {
    out += ' ';
    out += fmt_f64(x);
  }
  out += '\n';
}

struct LineCursor {
  const std::string& buf;
  size_t pos = 0;
  std::string line;
  const std::string& path;

  bool next() {
    if (pos >= buf.size()) return false;
    size_t nl = buf.find('\n', pos);
    if (nl == std::string::npos) nl = buf.size();
    line = buf.substr(pos, nl - pos);
    pos = nl + 1;
    return true;
  }

  std::string expect_tag(const char* tag) {
    if (!next()) throw_format(path + ": truncated (expected " + tag + ")");
    std::string t(tag);
    if (line.rfind(t + " ", 0) != 0) throw_format(path + ": expected '" + t + "' line");
    return line.substr(t.size() + 1);
  }
};

std::vector<double> parse_doubles(const std::string& s, size_t want, const std::string& path) {
  std::vector<double> out;
  out.reserve(want);
  const char* p = s.c_str();
  char* end = nullptr;
  while (*p) {
    double v = std::strtod(p, &end);
    if (end == p) break;
    out.push_back(v);
    p = end;
  }
  if (out.size() != want) throw_format(path + ": malformed statistics row");
  return out;
}

std::vector<uint32_t> parse_indices(const std::string& s, const std::string& path) {
  const char* p = s.c_str();
  char* end = nullptr;
  unsigned long count = std::strtoul(p, &end, 10);
  if (end == p) throw_format(path + ": malformed index row");
  p = end;
  std::vector<uint32_t> out;
  out.reserve(count);
  while (*p) {
    unsigned long v = std::strtoul(p, &end, 10);
    if (end == p) break;
    out.push_back(uint32_t(v));
    p = end;
  }
  if (out.size() != count) throw_format(path + ": index row count mismatch");
  return out;
}

}  // namespace

void save_dataset(const std::string& path, const Dataset& ds) {
  size_t n = ds.samples(), d = ds.dim();
  std::string out;
  out.reserve(64 + n * d * 4);
  out += "DLSVMDS 1\n";
  out += "seed " + std::to_string(ds.seed) + "\n";
  out += "batch " + std::to_string(ds.batch) + "\n";
  out += std::string("fit ") + (ds.fit_on_all ? "all" : "train") + "\n";
  out += "classes " + std::to_string(ds.classes()) + "\n";
  for (size_t i = 0; i < ds.class_names.size(); ++i)
    out += "class " + std::to_string(i) + " " + ds.class_names[i] + "\n";
  out += "samples " + std::to_string(n) + " dim " + std::to_string(d) + "\n";
  put_doubles(out, "mean", ds.mean);
  put_doubles(out, "stddev", ds.stddev);
  put_indices(out, "train", ds.split.train);
  put_indices(out, "test", ds.split.test);
  put_indices(out, "holdout", ds.split.holdout);
  out += "data\n";
  put_le_f32_array(out, ds.features.data(), n * d);
  out.append(reinterpret_cast<const char*>(ds.labels.data()), n);
  atomic_write_file(path, out);
}

Dataset load_dataset(const std::string& path) {
  std::string buf = read_entire_file(path);
  LineCursor cur{buf, 0, "", path};
  if (!cur.next() || cur.line != "DLSVMDS 1")
    throw_format(path + ": not a dataset container (bad magic)");

  Dataset ds;
  ds.seed = std::strtoull(cur.expect_tag("seed").c_str(), nullptr, 10);
  ds.batch = std::strtoull(cur.expect_tag("batch").c_str(), nullptr, 10);
  std::string fit = cur.expect_tag("fit");
  if (fit != "train" && fit != "all") throw_format(path + ": bad fit mode");
  ds.fit_on_all = fit == "all";

  size_t k = std::strtoull(cur.expect_tag("classes").c_str(), nullptr, 10);
  if (k < 2 || k > 256) throw_format(path + ": class count out of range");
  ds.class_names.resize(k);
  for (size_t i = 0; i < k; ++i) {
    std::string rest = cur.expect_tag("class");
    size_t sp = rest.find(' ');
    if (sp == std::string::npos) throw_format(path + ": malformed class line");
    if (std::strtoull(rest.c_str(), nullptr, 10) != i)
      throw_format(path + ": class lines out of order");
    ds.class_names[i] = rest.substr(sp + 1);
  }

  std::string dims = cur.expect_tag("samples");
  char* end = nullptr;
  size_t n = std::strtoull(dims.c_str(), &end, 10);
  std::string rest(end);
  size_t dpos = rest.find("dim ");
  if (dpos == std::string::npos) throw_format(path + ": malformed samples line");
  size_t d = std::strtoull(rest.c_str() + dpos + 4, nullptr, 10);
  if (n == 0 || d == 0) throw_format(path + ": empty dataset");

  ds.mean = parse_doubles(cur.expect_tag("mean"), d, path);
  ds.stddev = parse_doubles(cur.expect_tag("stddev"), d, path);
  ds.split.train = parse_indices(cur.expect_tag("train"), path);
  ds.split.test = parse_indices(cur.expect_tag("test"), path);
  ds.split.holdout = parse_indices(cur.expect_tag("holdout"), path);
  if (!cur.next() || cur.line != "data") throw_format(path + ": missing data section");

  size_t need = n * d * 4 + n;
  if (buf.size() - cur.pos != need) throw_format(path + ": payload size mismatch");
  std::vector<float> feats(n * d);
  get_le_f32_array(buf.data() + cur.pos, feats.data(), n * d);
  ds.features = Tensor::from_data({n, d}, std::move(feats));
  ds.labels.resize(n);
  std::memcpy(ds.labels.data(), buf.data() + cur.pos + n * d * 4, n);

  for (uint8_t y : ds.labels)
    if (y >= k) throw_format(path + ": label out of range");
  auto check_idx = [&](const std::vector<uint32_t>& idx) {
    for (uint32_t v : idx)
      if (v >= n) throw_format(path + ": split index out of range");
  };
  check_idx(ds.split.train);
  check_idx(ds.split.test);
  check_idx(ds.split.holdout);
  return ds;
}

std::string dataset_summary(const Dataset& ds) {
  std::string out;
  out += "samples " + std::to_string(ds.samples()) + "\n";
  out += "dim " + std::to_string(ds.dim()) + "\n";
  out += "classes " + std::to_string(ds.classes()) + "\n";
  out += "batch " + std::to_string(ds.batch) + "\n";
  out += "seed " + std::to_string(ds.seed) + "\n";
  out += "split train " + std::to_string(ds.split.train.size()) + " test " +
         std::to_string(ds.split.test.size()) + " holdout " +
         std::to_string(ds.split.holdout.size()) + "\n";
  out += std::string("fit ") + (ds.fit_on_all ? "all" : "train") + "\n";
  out += "feature_checksum " +
         fnv1a_hex(ds.features.data(), ds.features.size() * sizeof(float)) + "\n";
  std::string stats(reinterpret_cast<const char*>(ds.mean.data()),
                    ds.mean.size() * sizeof(double));
  stats.append(reinterpret_cast<const char*>(ds.stddev.data()),
               ds.stddev.size() * sizeof(double));
  out += "stats_checksum " + fnv1a_hex(stats.data(), stats.size()) + "\n";
  std::vector<size_t> counts(ds.classes(), 0);
  for (uint8_t y : ds.labels) ++counts[y];
  for (size_t i = 0; i < ds.classes(); ++i)
    out += "class " + std::to_string(i) + " " + ds.class_names[i] + " " +
           std::to_string(counts[i]) + "\n";
  return out;
}

Tensor gather_rows(const Tensor& features, const std::vector<uint32_t>& rows) {
  size_t d = features.shape()[1];
  Tensor out({rows.size(), d});
  for (size_t i = 0; i < rows.size(); ++i)
    std::copy(features.data() + size_t(rows[i]) * d,
              features.data() + (size_t(rows[i]) + 1) * d, out.data() + i * d);
  return out;
}

std::vector<int> gather_labels(const std::vector<uint8_t>& labels,
                               const std::vector<uint32_t>& rows) {
  std::vector<int> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = labels[rows[i]];
  return out;
}

}  // namespace dlsvm
