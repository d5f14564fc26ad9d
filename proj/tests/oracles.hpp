// Definition-literal reference implementations used to check the library.
// Everything here is written independently of the library internals (plain
// loops, no shared helpers), deliberately favoring clarity over speed.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"

namespace oracle {

// Average precision straight from the definition: for every rank k (1-based,
// ranking by descending score with ties broken by ascending index), rescan
// the whole prefix to get precision@k; average precision@k over the ranks
// that hold positives. O(N^2) on purpose.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<int>& truths) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order;
  std::vector<bool> used(n, false);
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (used[i]) continue;
      if (best == n || scores[i] > scores[best]) best = i;  // ties keep lower index
    }
    used[best] = true;
    order.push_back(best);
  }
  std::size_t positives = 0;
  for (int t : truths) positives += (t != 0);
  double ap = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (truths[order[k - 1]] == 0) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += (truths[order[i]] != 0);
    ap += static_cast<double>(hits) / static_cast<double>(k);
  }
  return ap / static_cast<double>(positives);
}

struct Confusion {
  std::vector<long> tp, fp, fn;
};

inline Confusion count_confusion(const agcn::Matrix& decisions, const agcn::Matrix& truths) {
  Confusion c{std::vector<long>(decisions.cols(), 0), std::vector<long>(decisions.cols(), 0),
              std::vector<long>(decisions.cols(), 0)};
  for (std::size_t i = 0; i < decisions.rows(); ++i)
    for (std::size_t j = 0; j < decisions.cols(); ++j) {
      const bool d = decisions(i, j) != 0.0, t = truths(i, j) != 0.0;
      if (d && t) ++c.tp[j];
      if (d && !t) ++c.fp[j];
      if (!d && t) ++c.fn[j];
    }
  return c;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(agcn::Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  return eig;
}

inline agcn::Matrix random_matrix(std::size_t r, std::size_t c, agcn::Rng& rng, double lo,
                                  double hi) {
  agcn::Matrix m(r, c);
  for (double& v : m.raw()) v = rng.uniform(lo, hi);
  return m;
}

inline agcn::Matrix random_binary(std::size_t r, std::size_t c, agcn::Rng& rng,
                                  double p = 0.5) {
  agcn::Matrix m(r, c);
  for (double& v : m.raw()) v = rng.uniform() < p ? 1.0 : 0.0;
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace oracle
