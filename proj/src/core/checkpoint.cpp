#include "core/checkpoint.hpp"

#include <cstdlib>
#include <cstring>

#include "core/errors.hpp"
#include "core/io_util.hpp"

namespace dlsvm {
namespace {

void put_sizes(std::string& out, const char* name, const std::vector<size_t>& v) {
  out += name;
  for (size_t x : v) {
    out += ' ';
    out += std::to_string(x);
  }
  out += '\n';
}

std::vector<size_t> parse_sizes(const std::string& s, const std::string& path) {
  std::vector<size_t> out;
  const char* p = s.c_str();
  char* end = nullptr;
  while (*p) {
    unsigned long long v = std::strtoull(p, &end, 10);
    if (end == p) break;
    out.push_back(size_t(v));
    p = end;
  }
  if (out.empty()) throw_format(path + ": empty size list");
  return out;
}

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
};

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model, const Adam<float>* opt,
                     const std::vector<std::string>& class_names,
                     const std::vector<double>& mean, const std::vector<double>& stddev) {
  const ModelSpec& s = model.spec;
  if (!class_names.empty() && class_names.size() != s.classes)
    throw_internal("checkpoint: class name count does not match spec");
  if (mean.size() != stddev.size())
    throw_internal("checkpoint: mean/stddev length mismatch");

  std::string out = "DLSVM1\n";
  out += std::string("model ") + model_kind_name(s.kind) + "\n";
  out += "batch " + std::to_string(s.batch) + "\n";
  out += "epochs " + std::to_string(s.epochs) + "\n";
  out += "lr " + fmt_f64(s.lr) + "\n";
  out += "svm_c " + fmt_f64(s.svm_c) + "\n";
  out += "keep_prob " + fmt_f64(s.keep_prob) + "\n";
  out += "seed " + std::to_string(s.seed) + "\n";
  out += std::string("reduction ") + reduction_name(s.reduction) + "\n";
  out += "classes " + std::to_string(s.classes) + "\n";
  out += "input_dim " + std::to_string(s.input_dim) + "\n";
  put_sizes(out, "image", {s.image_h, s.image_w, s.image_c});
  put_sizes(out, "mlp_hidden", s.mlp_hidden);
  put_sizes(out, "gru", {s.gru_layers, s.gru_hidden});
  put_sizes(out, "cnn_filters", s.cnn_filters);
  put_sizes(out, "cnn", {s.cnn_kernel, s.cnn_dense, s.pool_window, s.pool_stride});
  for (size_t i = 0; i < class_names.size(); ++i)
    out += "name " + std::to_string(i) + " " + class_names[i] + "\n";
  if (!mean.empty()) {
    out += "mean";
    for (double v : mean) out += " " + fmt_f64(v);
    out += "\nstddev";
    for (double v : stddev) out += " " + fmt_f64(v);
    out += '\n';
  }

  std::vector<ParamRef<float>> params = model.parameters();
  std::string payload;
  auto emit = [&](const std::string& name, const Tensor& t) {
    out += "tensor " + name + " " + std::to_string(t.size()) + "\n";
    put_le_f32_array(payload, t.data(), t.size());
  };
  for (const auto& p : params) emit(p.name, *p.value);
  if (opt) {
    if (opt->moment_count() != params.size())
      throw_internal("checkpoint: optimizer is bound to a different model");
    out += "adam_t " + std::to_string(opt->steps_taken()) + "\n";
    for (size_t i = 0; i < params.size(); ++i) emit("adam.m." + params[i].name, opt->moments_m(i));
    for (size_t i = 0; i < params.size(); ++i) emit("adam.v." + params[i].name, opt->moments_v(i));
  }
  out += "data\n";
  out += payload;
  atomic_write_file(path, out);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::string buf = read_entire_file(path);
  LineCursor cur{buf, 0, "", path};
  if (!cur.next() || cur.line != "DLSVM1")
    throw_format(path + ": not a model checkpoint (bad magic)");

  ModelSpec spec;
  LoadedCheckpoint loaded;
  std::vector<std::pair<std::string, size_t>> tensor_specs;
  bool saw_model = false;

  while (cur.next()) {
    if (cur.line == "data") break;
    size_t sp = cur.line.find(' ');
    if (sp == std::string::npos) throw_format(path + ": malformed line '" + cur.line + "'");
    std::string key = cur.line.substr(0, sp);
    std::string rest = cur.line.substr(sp + 1);

    if (key == "model") {
      spec.kind = model_kind_from_name(rest);
      saw_model = true;
    } else if (key == "batch") {
      spec.batch = std::strtoull(rest.c_str(), nullptr, 10);
    } else if (key == "epochs") {
      spec.epochs = std::strtoull(rest.c_str(), nullptr, 10);
    } else if (key == "lr") {
      spec.lr = std::strtod(rest.c_str(), nullptr);
    } else if (key == "svm_c") {
      spec.svm_c = std::strtod(rest.c_str(), nullptr);
    } else if (key == "keep_prob") {
      spec.keep_prob = std::strtod(rest.c_str(), nullptr);
    } else if (key == "seed") {
      spec.seed = std::strtoull(rest.c_str(), nullptr, 10);
    } else if (key == "reduction") {
      spec.reduction = reduction_from_name(rest);
    } else if (key == "classes") {
      spec.classes = std::strtoull(rest.c_str(), nullptr, 10);
    } else if (key == "input_dim") {
      spec.input_dim = std::strtoull(rest.c_str(), nullptr, 10);
    } else if (key == "image") {
      auto v = parse_sizes(rest, path);
      if (v.size() != 3) throw_format(path + ": image line needs h w c");
      spec.image_h = v[0];
      spec.image_w = v[1];
      spec.image_c = v[2];
    } else if (key == "mlp_hidden") {
      spec.mlp_hidden = parse_sizes(rest, path);
    } else if (key == "gru") {
      auto v = parse_sizes(rest, path);
      if (v.size() != 2) throw_format(path + ": gru line needs layers hidden");
      spec.gru_layers = v[0];
      spec.gru_hidden = v[1];
    } else if (key == "cnn_filters") {
      spec.cnn_filters = parse_sizes(rest, path);
    } else if (key == "cnn") {
      auto v = parse_sizes(rest, path);
      if (v.size() != 4) throw_format(path + ": cnn line needs kernel dense window stride");
      spec.cnn_kernel = v[0];
      spec.cnn_dense = v[1];
      spec.pool_window = v[2];
      spec.pool_stride = v[3];
    } else if (key == "name") {
      size_t sp2 = rest.find(' ');
      if (sp2 == std::string::npos) throw_format(path + ": malformed name line");
      size_t idx = std::strtoull(rest.c_str(), nullptr, 10);
      if (idx != loaded.class_names.size()) throw_format(path + ": name lines out of order");
      loaded.class_names.push_back(rest.substr(sp2 + 1));
    } else if (key == "mean") {
      loaded.mean = parse_doubles(rest, spec.input_dim, path);
    } else if (key == "stddev") {
      loaded.stddev = parse_doubles(rest, spec.input_dim, path);
    } else if (key == "adam_t") {
      loaded.adam_steps = std::strtoull(rest.c_str(), nullptr, 10);
      loaded.has_adam = true;
    } else if (key == "tensor") {
      size_t sp2 = rest.rfind(' ');
      if (sp2 == std::string::npos) throw_format(path + ": malformed tensor line");
      tensor_specs.emplace_back(rest.substr(0, sp2),
                                std::strtoull(rest.c_str() + sp2 + 1, nullptr, 10));
    } else {
      throw_format(path + ": unknown key '" + key + "'");
    }
  }
  if (!saw_model) throw_format(path + ": missing model line");
  if (!loaded.class_names.empty() && loaded.class_names.size() != spec.classes)
    throw_format(path + ": class name count does not match spec");

  size_t payload = 0;
  for (const auto& [name, numel] : tensor_specs) payload += numel * 4;
  if (buf.size() - cur.pos != payload) throw_format(path + ": payload size mismatch");

  loaded.model = build_model<float>(spec, /*init_params=*/false);
  std::vector<ParamRef<float>> params = loaded.model.parameters();

  size_t off = cur.pos;
  size_t next_param = 0;
  auto read_into = [&](Tensor& dst, size_t numel, const std::string& name) {
    if (dst.size() != numel)
      throw_format(path + ": tensor " + name + " has " + std::to_string(numel) +
                   " values, model expects " + std::to_string(dst.size()));
    get_le_f32_array(buf.data() + off, dst.data(), numel);
    off += numel * 4;
  };

  if (loaded.has_adam) {
    loaded.adam_m.reserve(params.size());
    loaded.adam_v.reserve(params.size());
  }
  for (const auto& [name, numel] : tensor_specs) {
    if (name.rfind("adam.m.", 0) == 0 || name.rfind("adam.v.", 0) == 0) {
      bool is_m = name[5] == 'm';
      std::string base = name.substr(7);
      std::vector<Tensor>& dst = is_m ? loaded.adam_m : loaded.adam_v;
      size_t pi = dst.size();
      if (pi >= params.size() || params[pi].name != base)
        throw_format(path + ": optimizer tensor " + name + " does not match model layout");
      Tensor t(params[pi].value->shape(), 0.0f);
      read_into(t, numel, name);
      dst.push_back(std::move(t));
    } else {
      if (next_param >= params.size() || params[next_param].name != name)
        throw_format(path + ": tensor " + name + " does not match model layout");
      read_into(*params[next_param].value, numel, name);
      ++next_param;
    }
  }
  if (next_param != params.size()) throw_format(path + ": missing parameter tensors");
  if (loaded.has_adam &&
      (loaded.adam_m.size() != params.size() || loaded.adam_v.size() != params.size()))
    throw_format(path + ": incomplete optimizer state");
  return loaded;
}

}  // namespace dlsvm
