#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "agcn/autodiff.hpp"
#include "agcn/errors.hpp"
#include "agcn/grad_check.hpp"
#include "agcn/init.hpp"
#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"

namespace agcn {

// Label names plus one row vector per label (C x d_e).
struct EmbeddingMatrix {
  std::vector<std::string> labels;
  Matrix values;

  std::size_t count() const { return labels.size(); }
  std::size_t dim() const { return values.cols(); }

  void validate() const {
    if (labels.empty()) throw input_error("embedding matrix has no labels");
    if (values.rows() != labels.size())
      throw input_error("embedding matrix: " + std::to_string(labels.size()) +
                        " labels but " + std::to_string(values.rows()) + " rows");
    if (values.cols() == 0) throw input_error("embedding matrix has zero dimension");
    for (std::size_t i = 0; i < labels.size(); ++i)
      for (std::size_t j = i + 1; j < labels.size(); ++j)
        if (labels[i] == labels[j])
          throw input_error("duplicate label '" + labels[i] + "'");
    if (!values.all_finite()) throw input_error("embedding matrix has non-finite entries");
  }
};

enum class LgVariant { Default, Cos, Fc, Dot };

inline const char* to_string(LgVariant v) {
  switch (v) {
    case LgVariant::Default: return "default";
    case LgVariant::Cos: return "cos";
    case LgVariant::Fc: return "fc";
    case LgVariant::Dot: return "dot";
  }
  return "?";
}

inline LgVariant parse_lg_variant(const std::string& s) {
  if (s == "default") return LgVariant::Default;
  if (s == "cos") return LgVariant::Cos;
  if (s == "fc") return LgVariant::Fc;
  if (s == "dot") return LgVariant::Dot;
  throw config_error("unknown graph variant '" + s + "' (expected default|cos|fc|dot)");
}

enum class SparseReduction { Sum, Mean };

inline const char* to_string(SparseReduction r) {
  return r == SparseReduction::Sum ? "sum" : "mean";
}

inline SparseReduction parse_sparse_reduction(const std::string& s) {
  if (s == "sum") return SparseReduction::Sum;
  if (s == "mean") return SparseReduction::Mean;
  throw config_error("unknown sparse reduction '" + s + "' (expected sum|mean)");
}

// Learnable weights of the graph builder. Which members are live depends on
// the variant: default uses w_phi and w_theta (plus optional row biases),
// dot uses only w_phi, fc uses only w_l, cos has no weights at all.
struct LgParams {
  LgVariant variant = LgVariant::Default;
  bool bias = false;
  Parameter w_phi;
  Parameter w_theta;
  Parameter w_l;
  Parameter b_phi;
  Parameter b_theta;

  // Weight draws happen in declaration order (w_phi, w_theta, w_l); biases
  // start at zero and consume no randomness. The default variant starts its
  // two projections at the same values: that makes the initial graph a
  // symmetric PSD similarity of the embeddings instead of a random indefinite
  // bilinear form, so edge pruning starts from geometry rather than from
  // initialization noise. The two matrices decouple from the first update.
  static LgParams create(LgVariant variant, std::size_t d_e, std::size_t n_labels,
                         std::size_t latent_dim, Rng& rng, bool bias = false) {
    if (latent_dim == 0) latent_dim = d_e;
    LgParams p;
    p.variant = variant;
    p.bias = bias;
    switch (variant) {
      case LgVariant::Default:
        p.w_phi = Parameter(glorot_uniform(d_e, latent_dim, rng));
        p.w_theta = Parameter(p.w_phi.value);
        if (bias) {
          p.b_phi = Parameter(Matrix(1, latent_dim));
          p.b_theta = Parameter(Matrix(1, latent_dim));
        }
        break;
      case LgVariant::Cos:
        break;
      case LgVariant::Fc:
        p.w_l = Parameter(glorot_uniform(d_e, n_labels, rng));
        break;
      case LgVariant::Dot:
        p.w_phi = Parameter(glorot_uniform(d_e, latent_dim, rng));
        break;
    }
    return p;
  }

  std::vector<NamedParam> named_params(const std::string& prefix = "lg.") {
    std::vector<NamedParam> out;
    switch (variant) {
      case LgVariant::Default:
        out.push_back({prefix + "w_phi", &w_phi});
        out.push_back({prefix + "w_theta", &w_theta});
        if (bias) {
          out.push_back({prefix + "b_phi", &b_phi});
          out.push_back({prefix + "b_theta", &b_theta});
        }
        break;
      case LgVariant::Cos:
        break;
      case LgVariant::Fc:
        out.push_back({prefix + "w_l", &w_l});
        break;
      case LgVariant::Dot:
        out.push_back({prefix + "w_phi", &w_phi});
        break;
    }
    return out;
  }
};

// Pairwise cosine similarity of embedding rows. Any all-zero row has no
// direction, so it is rejected rather than silently mapped to zero.
inline Matrix cosine_similarity(const EmbeddingMatrix& emb) {
  const Matrix& e = emb.values;
  const std::size_t c = e.rows(), d = e.cols();
  std::vector<double> norms(c);
  for (std::size_t i = 0; i < c; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += e(i, k) * e(i, k);
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0)
      throw input_error("cosine graph: embedding for label '" + emb.labels[i] +
                        "' is all zeros");
  }
  Matrix out(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += e(i, k) * e(j, k);
      out(i, j) = dot / (norms[i] * norms[j]);
    }
  return out;
}

// Records the raw (pre-normalization) C x C adjacency on the tape.
//   default: (1/C) (E w_phi)(E w_theta)^T   with optional row biases
//   cos:     pairwise cosine of embedding rows (no learnable weights)
//   fc:      E w_l
//   dot:     (1/C) (E w_phi)(E w_phi)^T
inline Var lg_raw(Tape& tape, const EmbeddingMatrix& emb, LgParams& params) {
  const std::size_t c = emb.count();
  Var e = tape.constant(emb.values);
  auto biased = [&](Var proj, Parameter& b) {
    // broadcast the 1 x d_l bias to every row via ones(c,1) * b
    Var onescol = tape.constant(Matrix::ones(c, 1));
    return tape.add(proj, tape.matmul(onescol, tape.leaf(b)));
  };
  switch (params.variant) {
    case LgVariant::Default: {
      Var phi = tape.matmul(e, tape.leaf(params.w_phi));
      Var theta = tape.matmul(e, tape.leaf(params.w_theta));
      if (params.bias) {
        phi = biased(phi, params.b_phi);
        theta = biased(theta, params.b_theta);
      }
      return tape.scale(tape.matmul(phi, tape.transpose(theta)),
                        1.0 / static_cast<double>(c));
    }
    case LgVariant::Cos:
      return tape.constant(cosine_similarity(emb));
    case LgVariant::Fc:
      return tape.matmul(e, tape.leaf(params.w_l));
    case LgVariant::Dot: {
      Var phi = tape.matmul(e, tape.leaf(params.w_phi));
      return tape.scale(tape.matmul(phi, tape.transpose(phi)),
                        1.0 / static_cast<double>(c));
    }
  }
  throw std::logic_error("unreachable graph variant");
}

// Symmetric normalization with self-loops and a degree floor:
//   A+    = max(raw, 0)            (negatives carry no edge weight)
//   Atil  = A+ + I
//   deg_i = max(sum_j Atil_ij, floor)
//   Ahat  = deg^(-1/2) Atil deg^(-1/2)
// Gradients flow only through entries that were strictly positive before
// rectification and rows whose degree cleared the floor.
inline Var normalize_graph(Tape& tape, Var raw, double degree_floor = 1e-6) {
  const Matrix& rv = tape.value(raw);
  if (rv.rows() != rv.cols())
    throw std::invalid_argument("normalize_graph: adjacency must be square, got " +
                                rv.shape_str());
  if (!(degree_floor > 0.0))
    throw std::invalid_argument("normalize_graph: degree floor must be positive");
  const std::size_t c = rv.rows();
  Var pos = tape.relu(raw);
  Var tilde = tape.add(pos, tape.constant(Matrix::identity(c)));
  Var deg = tape.matmul(tilde, tape.constant(Matrix::ones(c, 1)));
  Var dinv = tape.rsqrt(tape.clamp_min(deg, degree_floor));
  Var outer = tape.matmul(dinv, tape.transpose(dinv));
  return tape.mul(tilde, outer);
}

// Plain-value convenience for callers that do not need gradients.
inline Matrix normalize_graph(const Matrix& raw, double degree_floor = 1e-6) {
  Tape tape;
  return tape.value(normalize_graph(tape, tape.constant(raw), degree_floor));
}

// L1 distance between the normalized graph and the identity; drives the
// normalized adjacency toward sparse off-diagonals and strong self-loops.
// Mean reduction divides by C^2.
inline Var sparse_graph_loss(Tape& tape, Var a_hat,
                             SparseReduction reduction = SparseReduction::Sum) {
  const Matrix& v = tape.value(a_hat);
  if (v.rows() != v.cols())
    throw std::invalid_argument("sparse_graph_loss: input must be square, got " +
                                v.shape_str());
  const std::size_t c = v.rows();
  Var diff = tape.sub(a_hat, tape.constant(Matrix::identity(c)));
  Var total = tape.reduce_sum(tape.abs(diff));
  if (reduction == SparseReduction::Mean)
    total = tape.scale(total, 1.0 / static_cast<double>(c * c));
  return total;
}

// Raw adjacency as a plain matrix (throwaway tape).
inline Matrix lg_matrix(const EmbeddingMatrix& emb, LgParams& params) {
  Tape tape;
  return tape.value(lg_raw(tape, emb, params));
}

// ---- graph CSV (header "label,<name>,...", %.17g values, exact round-trip)

inline void write_graph_csv(std::ostream& os, const std::vector<std::string>& labels,
                            const Matrix& values) {
  if (values.rows() != labels.size() || values.cols() != labels.size())
    throw std::invalid_argument("graph csv: " + std::to_string(labels.size()) +
                                " labels vs matrix " + values.shape_str());
  for (const auto& l : labels)
    if (l.find(',') != std::string::npos || l.find('\n') != std::string::npos)
      throw input_error("graph csv: label '" + l + "' contains a separator");
  os << "label";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  char buf[40];
  for (std::size_t i = 0; i < values.rows(); ++i) {
    os << labels[i];
    for (std::size_t j = 0; j < values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", values(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

struct NamedGraph {
  std::vector<std::string> labels;
  Matrix values;
};

inline NamedGraph read_graph_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw input_error("graph csv: empty input");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = s.find(',', start);
      if (pos == std::string::npos) {
        out.push_back(s.substr(start));
        return out;
      }
      out.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
  };
  std::vector<std::string> head = split(line);
  if (head.size() < 2 || head[0] != "label")
    throw input_error("graph csv: bad header '" + line + "'");
  NamedGraph g;
  g.labels.assign(head.begin() + 1, head.end());
  const std::size_t c = g.labels.size();
  g.values = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::getline(is, line))
      throw input_error("graph csv: expected " + std::to_string(c) + " rows, got " +
                        std::to_string(i));
    std::vector<std::string> cells = split(line);
    if (cells.size() != c + 1)
      throw input_error("graph csv row " + std::to_string(i + 2) + ": expected " +
                        std::to_string(c + 1) + " cells, got " +
                        std::to_string(cells.size()));
    if (cells[0] != g.labels[i])
      throw input_error("graph csv row " + std::to_string(i + 2) + ": label '" +
                        cells[0] + "' does not match header '" + g.labels[i] + "'");
    for (std::size_t j = 0; j < c; ++j) {
      try {
        std::size_t used = 0;
        g.values(i, j) = std::stod(cells[j + 1], &used);
        if (used != cells[j + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw input_error("graph csv row " + std::to_string(i + 2) + ": bad number '" +
                          cells[j + 1] + "'");
      }
    }
  }
  return g;
}

}  // namespace agcn
