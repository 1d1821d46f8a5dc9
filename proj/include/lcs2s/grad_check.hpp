#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lcs2s/tensor.hpp"

namespace lcs2s {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_location;  // "<param>[row,col]"
  bool found_nan = false;
  std::string nan_location;

  bool passed(double tolerance) const { return !found_nan && max_relative_error < tolerance; }
};

/// Compares tape gradients of a scalar function against central differences.
///
/// `loss` must build the same scalar on whatever tape it is handed, reading
/// the parameters through Tape::param / Tape::gather. Per entry the error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
template <typename Scalar>
GradCheckReport grad_check(std::span<Parameter<Scalar>* const> params,
                           const std::function<Var<Scalar>(Tape<Scalar>&)>& loss, double eps) {
  for (Parameter<Scalar>* p : params) p->zero_grad();
  {
    Tape<Scalar> tape(true);
    tape.backward(loss(tape));
  }

  auto evaluate = [&]() {
    Tape<Scalar> tape(false);
    return static_cast<double>(loss(tape).value()(0, 0));
  };

  GradCheckReport report;
  for (Parameter<Scalar>* p : params) {
    for (Index r = 0; r < p->rows(); ++r) {
      for (Index c = 0; c < p->cols(); ++c) {
        const std::string where = p->name + "[" + std::to_string(r) + "," + std::to_string(c) + "]";
        const Scalar saved = p->value(r, c);
        p->value(r, c) = saved + static_cast<Scalar>(eps);
        const double up = evaluate();
        p->value(r, c) = saved - static_cast<Scalar>(eps);
        const double down = evaluate();
        p->value(r, c) = saved;

        const double numeric = (up - down) / (2.0 * eps);
        const double analytic = static_cast<double>(p->grad(r, c));
        if (std::isnan(numeric) || std::isnan(analytic)) {
          if (!report.found_nan) {
            report.found_nan = true;
            report.nan_location = where;
          }
          continue;
        }
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double err = std::abs(analytic - numeric) / denom;
        if (err > report.max_relative_error) {
          report.max_relative_error = err;
          report.worst_location = where;
        }
      }
    }
  }
  return report;
}

template <typename Scalar>
GradCheckReport grad_check(std::vector<Parameter<Scalar>*> params,
                           const std::function<Var<Scalar>(Tape<Scalar>&)>& loss, double eps) {
  return grad_check<Scalar>(std::span<Parameter<Scalar>* const>(params), loss, eps);
}

}  // namespace lcs2s
