#include "cru/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "cru/errors.hpp"

namespace cru {

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / denom;
}

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  return loss(tape).value().item();
}

}  // namespace

GradcheckReport finite_diff_gradcheck(const LossBuilder& loss, std::span<Param* const> params,
                                      double h, double tol) {
  if (!(h > 0.0)) throw ConfigError("gradcheck step h must be positive");

  const double base1 = evaluate(loss);
  const double base2 = evaluate(loss);
  if (base1 != base2) {
    throw ContractError("gradcheck loss is not deterministic (disable dropout?)");
  }

  for (Param* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }

  GradcheckReport report;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double plus = evaluate(loss);
      p->value[i] = orig - h;
      const double minus = evaluate(loss);
      p->value[i] = orig;

      GradcheckEntry entry{p->name, i, p->grad[i], (plus - minus) / (2.0 * h), 0.0};
      entry.rel_error = relative_error(entry.analytic, entry.numeric);
      ++report.checked;
      if (entry.rel_error >= report.max_rel_error) {
        report.max_rel_error = entry.rel_error;
        report.worst = entry;
      }
      if (!(entry.rel_error < tol)) {
        report.passed = false;
        report.failures.push_back(entry);
      }
    }
  }
  return report;
}

}  // namespace cru
