#include "cru/optim.hpp"

#include <cmath>

#include "cru/errors.hpp"

namespace cru {

double global_grad_norm(std::span<Param* const> params) {
  double sq = 0.0;
  for (const Param* p : params) {
    for (double g : p->grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Param* const> params, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (Param* p : params) {
      for (auto& g : p->grad.data()) g *= s;
    }
  }
  return norm;
}

AdamState::AdamState(std::span<Param* const> params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Param* p : params) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void AdamState::step(std::span<Param* const> params) {
  if (params.size() != m_.size()) {
    throw ContractError("adam: " + std::to_string(params.size()) + " params but state for " +
                        std::to_string(m_.size()));
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    if (p.value.shape() != m_[k].shape() || p.grad.shape() != m_[k].shape()) {
      throw ContractError("adam: shape drift on " + p.name);
    }
    double* theta = p.value.raw();
    const double* g = p.grad.raw();
    double* m = m_[k].raw();
    double* v = v_[k].raw();
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

Var l2_penalty(Var embedding_weights, double lambda) {
  if (lambda < 0.0) throw ConfigError("l2 lambda must be >= 0");
  return scale(sum(mul(embedding_weights, embedding_weights)), lambda);
}

}  // namespace cru
