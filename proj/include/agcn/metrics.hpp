#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "agcn/errors.hpp"
#include "agcn/matrix.hpp"

namespace agcn {

// Indices sorted by descending score; equal scores keep ascending original
// index, so every ranking-based metric is deterministic.
inline std::vector<std::size_t> ranking_order(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Non-interpolated AP: mean of precision@k over the ranks k holding positives.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& truths) {
  if (scores.size() != truths.size())
    throw std::invalid_argument("average_precision: " + std::to_string(scores.size()) +
                                " scores vs " + std::to_string(truths.size()) + " truths");
  std::size_t positives = 0;
  for (int t : truths) positives += (t != 0);
  if (positives == 0) throw input_error("average_precision: no positive items");
  const std::vector<std::size_t> order = ranking_order(scores);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (truths[order[k]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

struct MapResult {
  double value = 0.0;
  std::vector<std::size_t> skipped;  // classes with zero positives, excluded
};

// Unweighted mean of per-class AP over classes that have at least one
// positive; zero-positive classes are recorded, not averaged.
inline MapResult mean_average_precision(const Matrix& scores, const Matrix& truths) {
  if (!scores.same_shape(truths))
    throw std::invalid_argument("mean_average_precision: shape mismatch " +
                                scores.shape_str() + " vs " + truths.shape_str());
  const std::size_t n = scores.rows(), c = scores.cols();
  MapResult res;
  double total = 0.0;
  std::size_t included = 0;
  for (std::size_t j = 0; j < c; ++j) {
    std::vector<double> s(n);
    std::vector<int> t(n);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = scores(i, j);
      t[i] = truths(i, j) != 0.0 ? 1 : 0;
      pos += t[i];
    }
    if (pos == 0) {
      res.skipped.push_back(j);
      continue;
    }
    total += average_precision(s, t);
    ++included;
  }
  if (included == 0) throw input_error("mean_average_precision: no class has positives");
  res.value = total / static_cast<double>(included);
  return res;
}

// All N*C (score, truth) pairs pooled into one class-agnostic ranking,
// flattened row-major.
inline double ap_all(const Matrix& scores, const Matrix& truths) {
  if (!scores.same_shape(truths))
    throw std::invalid_argument("ap_all: shape mismatch " + scores.shape_str() + " vs " +
                                truths.shape_str());
  std::vector<double> s(scores.raw().begin(), scores.raw().end());
  std::vector<int> t(truths.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = truths.raw()[i] != 0.0 ? 1 : 0;
    pos += t[i];
  }
  if (pos == 0) throw input_error("ap_all: no positive pairs");
  return average_precision(s, t);
}

// Positive when the confidence strictly exceeds the threshold.
inline Matrix threshold_decisions(const Matrix& scores, double threshold = 0.5) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.raw()[i] = scores.raw()[i] > threshold ? 1.0 : 0.0;
  return out;
}

// Exactly k positives per row at the k highest scores; no threshold. Ties
// resolved toward the lower column index.
inline Matrix topk_decisions(const Matrix& scores, std::size_t k) {
  if (k > scores.cols())
    throw std::invalid_argument("topk_decisions: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(scores.cols()) + " classes");
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::vector<double> row(scores.cols());
    for (std::size_t j = 0; j < scores.cols(); ++j) row[j] = scores(i, j);
    const std::vector<std::size_t> order = ranking_order(row);
    for (std::size_t r = 0; r < k; ++r) out(i, order[r]) = 1.0;
  }
  return out;
}

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ConfusionCounts {
  std::vector<std::size_t> tp, fp, fn;  // per class
};

inline ConfusionCounts confusion_counts(const Matrix& decisions, const Matrix& truths) {
  if (!decisions.same_shape(truths))
    throw std::invalid_argument("confusion_counts: shape mismatch " +
                                decisions.shape_str() + " vs " + truths.shape_str());
  const std::size_t n = decisions.rows(), c = decisions.cols();
  ConfusionCounts cc{std::vector<std::size_t>(c, 0), std::vector<std::size_t>(c, 0),
                     std::vector<std::size_t>(c, 0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const bool d = decisions(i, j) != 0.0;
      const bool t = truths(i, j) != 0.0;
      if (d && t)
        ++cc.tp[j];
      else if (d && !t)
        ++cc.fp[j];
      else if (!d && t)
        ++cc.fn[j];
    }
  return cc;
}

// Pooled (micro) precision/recall/F1. Zero denominators define the term as 0
// and append a note to flags.
inline Prf prf_overall(const Matrix& decisions, const Matrix& truths,
                       std::vector<std::string>* flags = nullptr,
                       const std::string& tag = "overall") {
  const ConfusionCounts cc = confusion_counts(decisions, truths);
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t j = 0; j < cc.tp.size(); ++j) {
    tp += cc.tp[j];
    fp += cc.fp[j];
    fn += cc.fn[j];
  }
  auto note = [&](const std::string& msg) {
    if (flags) flags->push_back(tag + ": " + msg);
  };
  Prf out;
  if (tp + fp == 0)
    note("no predicted positives; precision defined as 0");
  else
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn == 0)
    note("no true positives in truths; recall defined as 0");
  else
    out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (out.precision + out.recall == 0.0)
    note("precision+recall is 0; F1 defined as 0");
  else
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

// Class-averaged (macro) precision/recall/F1. Classes without positives in
// the truths are excluded from the means (callers report them via skipped);
// per-class zero denominators define that class's term as 0 and flag it.
inline Prf prf_per_class(const Matrix& decisions, const Matrix& truths,
                         std::vector<std::string>* flags = nullptr,
                         const std::string& tag = "per-class") {
  const ConfusionCounts cc = confusion_counts(decisions, truths);
  auto note = [&](const std::string& msg) {
    if (flags) flags->push_back(tag + ": " + msg);
  };
  double psum = 0.0, rsum = 0.0;
  std::size_t included = 0;
  for (std::size_t j = 0; j < cc.tp.size(); ++j) {
    if (cc.tp[j] + cc.fn[j] == 0) continue;  // no positives: excluded
    ++included;
    if (cc.tp[j] + cc.fp[j] == 0)
      note("class " + std::to_string(j) + " has no predicted positives; precision term 0");
    else
      psum += static_cast<double>(cc.tp[j]) / static_cast<double>(cc.tp[j] + cc.fp[j]);
    rsum += static_cast<double>(cc.tp[j]) / static_cast<double>(cc.tp[j] + cc.fn[j]);
  }
  Prf out;
  if (included == 0) {
    note("no class has positives; all terms defined as 0");
    return out;
  }
  out.precision = psum / static_cast<double>(included);
  out.recall = rsum / static_cast<double>(included);
  if (out.precision + out.recall == 0.0)
    note("precision+recall is 0; F1 defined as 0");
  else
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

struct MetricSection {
  double map = 0.0;
  Prf per_class;  // CP, CR, CF1
  Prf overall;    // OP, OR, OF1
};

struct MetricReport {
  MetricSection all;   // threshold decisions
  MetricSection topk;  // top-k decisions
  double threshold = 0.5;
  std::size_t top_k = 3;
  double ap_all = 0.0;
  std::vector<std::string> skipped_labels;  // zero-positive classes
  std::vector<std::string> flags;
};

// Full battery over confidences in [0,1] and binary truths. labels may be
// empty, in which case skipped classes are reported by index.
inline MetricReport compute_report(const Matrix& scores, const Matrix& truths,
                                   const std::vector<std::string>& labels = {},
                                   double threshold = 0.5, std::size_t top_k = 3) {
  if (!scores.same_shape(truths))
    throw std::invalid_argument("compute_report: shape mismatch " + scores.shape_str() +
                                " vs " + truths.shape_str());
  if (scores.rows() == 0) throw input_error("compute_report: no samples");
  MetricReport rep;
  rep.threshold = threshold;
  rep.top_k = top_k;
  const MapResult mr = mean_average_precision(scores, truths);
  for (std::size_t j : mr.skipped)
    rep.skipped_labels.push_back(j < labels.size() ? labels[j]
                                                   : "class" + std::to_string(j));
  const Matrix thr = threshold_decisions(scores, threshold);
  const Matrix top = topk_decisions(scores, top_k);
  rep.all.map = mr.value;
  rep.all.per_class = prf_per_class(thr, truths, &rep.flags, "all.C");
  rep.all.overall = prf_overall(thr, truths, &rep.flags, "all.O");
  rep.topk.map = mr.value;  // ranking metric; independent of the decision rule
  const std::string ktag = "top" + std::to_string(top_k);
  rep.topk.per_class = prf_per_class(top, truths, &rep.flags, ktag + ".C");
  rep.topk.overall = prf_overall(top, truths, &rep.flags, ktag + ".O");
  rep.ap_all = agcn::ap_all(scores, truths);
  return rep;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Machine-readable form: one key=value per line. Keys: all.{mAP,CP,CR,CF1,
// OP,OR,OF1}, top<k>.{...same seven...}, AP_all, threshold, top_k,
// skipped_classes (comma-joined), flags (semicolon-joined).
inline void write_report_kv(std::ostream& os, const MetricReport& r) {
  const std::string k = "top" + std::to_string(r.top_k);
  auto section = [&](const std::string& p, const MetricSection& s) {
    os << p << ".mAP=" << fmt17(s.map) << '\n';
    os << p << ".CP=" << fmt17(s.per_class.precision) << '\n';
    os << p << ".CR=" << fmt17(s.per_class.recall) << '\n';
    os << p << ".CF1=" << fmt17(s.per_class.f1) << '\n';
    os << p << ".OP=" << fmt17(s.overall.precision) << '\n';
    os << p << ".OR=" << fmt17(s.overall.recall) << '\n';
    os << p << ".OF1=" << fmt17(s.overall.f1) << '\n';
  };
  section("all", r.all);
  section(k, r.topk);
  os << "AP_all=" << fmt17(r.ap_all) << '\n';
  os << "threshold=" << fmt17(r.threshold) << '\n';
  os << "top_k=" << r.top_k << '\n';
  os << "skipped_classes=";
  for (std::size_t i = 0; i < r.skipped_labels.size(); ++i)
    os << (i ? "," : "") << r.skipped_labels[i];
  os << '\n';
  os << "flags=";
  for (std::size_t i = 0; i < r.flags.size(); ++i) os << (i ? ";" : "") << r.flags[i];
  os << '\n';
}

inline void write_report_table(std::ostream& os, const MetricReport& r) {
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %10s %10s\n", "metric", "all",
                ("top" + std::to_string(r.top_k)).c_str());
  os << line;
  auto row = [&](const char* name, double a, double b) {
    std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f\n", name, a, b);
    os << line;
  };
  row("mAP", r.all.map, r.topk.map);
  row("CP", r.all.per_class.precision, r.topk.per_class.precision);
  row("CR", r.all.per_class.recall, r.topk.per_class.recall);
  row("CF1", r.all.per_class.f1, r.topk.per_class.f1);
  row("OP", r.all.overall.precision, r.topk.overall.precision);
  row("OR", r.all.overall.recall, r.topk.overall.recall);
  row("OF1", r.all.overall.f1, r.topk.overall.f1);
  std::snprintf(line, sizeof line, "%-8s %10.4f\n", "AP_all", r.ap_all);
  os << line;
  os << "skipped classes (no positives): ";
  if (r.skipped_labels.empty())
    os << "none";
  else
    for (std::size_t i = 0; i < r.skipped_labels.size(); ++i)
      os << (i ? ", " : "") << r.skipped_labels[i];
  os << '\n';
  if (!r.flags.empty()) {
    os << "flags:\n";
    for (const auto& f : r.flags) os << "  - " << f << '\n';
  }
}

}  // namespace agcn
