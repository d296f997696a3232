#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cru/gradcheck.hpp"

namespace cru {

struct ComponentCheck {
  std::string component;  // gru | shallow | deep | deep_enhanced | classifier
  std::uint64_t seed = 0;
  GradcheckReport report;
};

struct GradcheckSuiteOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 5;
  double h = 1e-5;
  double tol = 1e-4;
};

/// Finite-difference checks at toy shapes (n <= 5, d = 4):
/// every cell variant through a masked batched run with the input itself
/// as a checked parameter, and the end-to-end classifier with bce + L2.
std::vector<ComponentCheck> run_gradcheck_suite(const GradcheckSuiteOptions& options);

}  // namespace cru
