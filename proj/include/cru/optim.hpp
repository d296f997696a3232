#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cru/autodiff.hpp"
#include "cru/layers.hpp"

namespace cru {

/// Euclidean norm of all gradients taken together.
double global_grad_norm(std::span<Param* const> params);

/// Scales every gradient by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm measured before clipping.
double clip_global_norm(std::span<Param* const> params, double max_norm);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments for a fixed list of parameters (same order every step).
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<Param* const> params, AdamConfig config);

  /// t += 1; m, v updated; θ -= lr * m̂ / (sqrt(v̂) + eps).
  /// Throws ContractError when the parameter list no longer matches the state.
  void step(std::span<Param* const> params);

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  std::uint64_t t() const { return t_; }
  void set_t(std::uint64_t t) { t_ = t; }
  std::vector<Tensor>& first_moments() { return m_; }
  std::vector<Tensor>& second_moments() { return v_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// λ · Σ w² over the embedding weights only, as a loss term on the tape.
Var l2_penalty(Var embedding_weights, double lambda);

}  // namespace cru
