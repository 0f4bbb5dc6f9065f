#include "core/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "core/errors.hpp"

namespace dlsvm {
namespace {

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

EvalReport evaluate(const std::vector<int>& truth, const std::vector<int>& predicted,
                    std::vector<std::string> class_names) {
  if (truth.size() != predicted.size()) throw_dimension("evaluate: vector lengths differ");
  if (truth.empty()) throw_input("evaluate: nothing to score");
  size_t k = class_names.size();
  if (k < 2) throw_input("evaluate: need at least two classes");

  EvalReport r;
  r.class_names = std::move(class_names);
  r.confusion.assign(k * k, 0);
  r.total = truth.size();
  for (size_t i = 0; i < truth.size(); ++i) {
    int t = truth[i], p = predicted[i];
    if (t < 0 || size_t(t) >= k || p < 0 || size_t(p) >= k)
      throw_input("evaluate: label outside class range");
    ++r.confusion[size_t(t) * k + size_t(p)];
  }

  size_t trace = 0;
  r.per_class.resize(k);
  for (size_t c = 0; c < k; ++c) {
    ClassMetrics& m = r.per_class[c];
    size_t row = 0, col = 0;
    for (size_t j = 0; j < k; ++j) {
      row += r.confusion[c * k + j];
      col += r.confusion[j * k + c];
    }
    size_t hit = r.confusion[c * k + c];
    trace += hit;
    m.support = row;
    m.predicted = col;
    m.precision_defined = col > 0;
    m.recall_defined = row > 0;
    m.precision = col > 0 ? double(hit) / double(col) : 0.0;
    m.recall = row > 0 ? double(hit) / double(row) : 0.0;
    double pr = m.precision + m.recall;
    m.f1 = pr > 0 ? 2.0 * m.precision * m.recall / pr : 0.0;

    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
    r.weighted_precision += m.precision * double(row);
    r.weighted_recall += m.recall * double(row);
    r.weighted_f1 += m.f1 * double(row);
  }
  r.accuracy = double(trace) / double(r.total);
  r.macro_precision /= double(k);
  r.macro_recall /= double(k);
  r.macro_f1 /= double(k);
  r.weighted_precision /= double(r.total);
  r.weighted_recall /= double(r.total);
  r.weighted_f1 /= double(r.total);
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "name,support,precision,recall,f1\n";
  for (size_t c = 0; c < r.classes(); ++c) {
    const ClassMetrics& m = r.per_class[c];
    out += csv_field(r.class_names[c]) + "," + std::to_string(m.support) + "," +
           num(m.precision) + "," + num(m.recall) + "," + num(m.f1) + "\n";
  }
  out += "macro," + std::to_string(r.total) + "," + num(r.macro_precision) + "," +
         num(r.macro_recall) + "," + num(r.macro_f1) + "\n";
  out += "weighted," + std::to_string(r.total) + "," + num(r.weighted_precision) + "," +
         num(r.weighted_recall) + "," + num(r.weighted_f1) + "\n";
  return out;
}

std::string report_text(const EvalReport& r) {
  size_t name_w = 8;
  for (const auto& n : r.class_names) name_w = std::max(name_w, n.size());
  name_w = std::max(name_w, std::string("weighted avg").size());

  auto row = [&](const std::string& name, const std::string& support, double p, double rc,
                 double f1, const char* note) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-*s %8s  %9s  %9s  %9s%s\n", int(name_w), name.c_str(),
                  support.c_str(), fixed6(p).c_str(), fixed6(rc).c_str(), fixed6(f1).c_str(),
                  note);
    return std::string(buf);
  };

  char head[256];
  std::snprintf(head, sizeof(head), "%-*s %8s  %9s  %9s  %9s\n", int(name_w), "class",
                "support", "precision", "recall", "f1");
  std::string out = head;
  for (size_t c = 0; c < r.classes(); ++c) {
    const ClassMetrics& m = r.per_class[c];
    const char* note = "";
    if (!m.precision_defined && !m.recall_defined) note = "  (no instances)";
    else if (!m.precision_defined) note = "  (never predicted)";
    else if (!m.recall_defined) note = "  (no true instances)";
    out += row(r.class_names[c], std::to_string(m.support), m.precision, m.recall, m.f1, note);
  }
  out += row("macro avg", std::to_string(r.total), r.macro_precision, r.macro_recall,
             r.macro_f1, "");
  out += row("weighted avg", std::to_string(r.total), r.weighted_precision, r.weighted_recall,
             r.weighted_f1, "");
  char acc[128];
  size_t hits = 0;
  for (size_t c = 0; c < r.classes(); ++c) hits += r.at(c, c);
  std::snprintf(acc, sizeof(acc), "%-*s %8zu  %9s  (%zu/%zu)\n", int(name_w), "accuracy",
                r.total, fixed6(r.accuracy).c_str(), hits, r.total);
  out += acc;
  return out;
}

std::string confusion_csv(const EvalReport& r) {
  std::string out = "true\\predicted";
  for (const auto& n : r.class_names) out += "," + csv_field(n);
  out += '\n';
  for (size_t t = 0; t < r.classes(); ++t) {
    out += csv_field(r.class_names[t]);
    for (size_t p = 0; p < r.classes(); ++p) out += "," + std::to_string(r.at(t, p));
    out += '\n';
  }
  return out;
}

std::string confusion_svg(const EvalReport& r) {
  size_t k = r.classes();
  size_t cell = k <= 30 ? 26 : 14;
  size_t name_w = 0;
  for (const auto& n : r.class_names) name_w = std::max(name_w, n.size());
  size_t left = 16 + name_w * 7;
  size_t top = 16 + name_w * 6;
  size_t width = left + k * cell + 16;
  size_t height = top + k * cell + 40;

  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%zu\" height=\"%zu\" "
                "viewBox=\"0 0 %zu %zu\" font-family=\"sans-serif\">\n",
                width, height, width, height);
  svg = buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  for (size_t t = 0; t < k; ++t) {
    size_t row_total = r.per_class[t].support;
    for (size_t p = 0; p < k; ++p) {
      double v = row_total ? double(r.at(t, p)) / double(row_total) : 0.0;
      int cr = int(247 + (8 - 247) * v);
      int cg = int(251 + (48 - 251) * v);
      int cb = int(255 + (107 - 255) * v);
      size_t x = left + p * cell, y = top + t * cell;
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%zu\" y=\"%zu\" width=\"%zu\" height=\"%zu\" "
                    "fill=\"rgb(%d,%d,%d)\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n",
                    x, y, cell, cell, cr, cg, cb);
      svg += buf;
      if (r.at(t, p) > 0 && cell >= 20) {
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%zu\" y=\"%zu\" font-size=\"8\" text-anchor=\"middle\" "
                      "fill=\"%s\">%zu</text>\n",
                      x + cell / 2, y + cell / 2 + 3, v > 0.55 ? "#ffffff" : "#1a1a1a",
                      r.at(t, p));
        svg += buf;
      }
    }
  }

  for (size_t t = 0; t < k; ++t) {
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%zu\" y=\"%zu\" font-size=\"10\" text-anchor=\"end\">%s</text>\n",
                  left - 6, top + t * cell + cell / 2 + 3,
                  xml_escape(r.class_names[t]).c_str());
    svg += buf;
  }
  for (size_t p = 0; p < k; ++p) {
    size_t x = left + p * cell + cell / 2;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%zu\" y=\"%zu\" font-size=\"10\" text-anchor=\"start\" "
                  "transform=\"rotate(-60 %zu %zu)\">%s</text>\n",
                  x, top - 6, x, top - 6, xml_escape(r.class_names[p]).c_str());
    svg += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%zu\" y=\"%zu\" font-size=\"12\">rows: true class, columns: "
                "predicted, shading: row share, accuracy %s</text>\n",
                left, top + k * cell + 24, fixed6(r.accuracy).c_str());
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace dlsvm
