#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cru/autodiff.hpp"

namespace cru {

/// |a - b| / max(|a|, |b|, 1e-8).
double relative_error(double a, double b);

struct GradcheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
  GradcheckEntry worst;
  std::vector<GradcheckEntry> failures;
};

/// Builds a scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares tape gradients against central differences
/// (f(θ+h) - f(θ-h)) / 2h for every entry of every parameter.
///
/// The loss must be deterministic: two baseline evaluations that differ
/// bitwise raise ContractError. Parameter values are restored on return and
/// their grads hold the analytic gradient.
GradcheckReport finite_diff_gradcheck(const LossBuilder& loss, std::span<Param* const> params,
                                      double h = 1e-5, double tol = 1e-4);

}  // namespace cru
