#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "agcn/autodiff.hpp"
#include "agcn/errors.hpp"
#include "agcn/matrix.hpp"

namespace agcn {

struct NamedParam {
  std::string name;
  Parameter* param = nullptr;
};

struct GradCheckEntry {
  std::string name;
  std::size_t row = 0;
  std::size_t col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // every coordinate checked
  double max_rel_err = 0.0;
  std::size_t failures = 0;
  double tolerance = 0.0;

  bool ok() const { return failures == 0; }

  const GradCheckEntry& worst() const {
    const GradCheckEntry* w = &entries.front();
    for (const auto& e : entries)
      if (e.rel_err > w->rel_err) w = &e;
    return *w;
  }
};

// Compares reverse-mode gradients of a scalar-valued builder against central
// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. The builder
// is re-run on a fresh tape for every probe, so it must be a pure function
// of the parameter values. Relative error uses max(1, |a|, |fd|) as the
// denominator, which behaves like absolute error near zero.
inline GradCheckReport grad_check(const std::function<Var(Tape&)>& f,
                                  const std::vector<NamedParam>& params,
                                  double h = 1e-5, double tol = 1e-4) {
  auto eval = [&f]() {
    Tape t;
    Var out = f(t);
    const Matrix& v = t.value(out);
    if (v.rows() != 1 || v.cols() != 1)
      throw std::invalid_argument("grad_check: builder must return a 1x1 value, got " +
                                  v.shape_str());
    const double s = v(0, 0);
    if (!std::isfinite(s)) throw input_error("grad_check: non-finite loss during probe");
    return s;
  };

  // One analytic pass.
  std::vector<Matrix> analytic;
  {
    Tape t;
    for (const auto& np : params) np.param->zero_grad();
    Var out = f(t);
    const Matrix& v = t.value(out);
    if (v.rows() != 1 || v.cols() != 1)
      throw std::invalid_argument("grad_check: builder must return a 1x1 value, got " +
                                  v.shape_str());
    if (!std::isfinite(v(0, 0)))
      throw input_error("grad_check: non-finite loss at the base point");
    t.backward(out);
    analytic.reserve(params.size());
    for (const auto& np : params) analytic.push_back(np.param->grad);
  }

  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& par = *params[p].param;
    for (std::size_t r = 0; r < par.value.rows(); ++r) {
      for (std::size_t c = 0; c < par.value.cols(); ++c) {
        const double saved = par.value(r, c);
        par.value(r, c) = saved + h;
        const double fp = eval();
        par.value(r, c) = saved - h;
        const double fm = eval();
        par.value(r, c) = saved;

        GradCheckEntry e;
        e.name = params[p].name;
        e.row = r;
        e.col = c;
        e.analytic = analytic[p](r, c);
        e.numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({1.0, std::abs(e.analytic), std::abs(e.numeric)});
        e.rel_err = std::abs(e.analytic - e.numeric) / denom;
        if (e.rel_err > report.max_rel_err) report.max_rel_err = e.rel_err;
        if (e.rel_err > tol) ++report.failures;
        report.entries.push_back(std::move(e));
      }
    }
  }
  return report;
}

}  // namespace agcn
