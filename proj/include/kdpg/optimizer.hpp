#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace kdpg {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. `step` moves params along +direction (ascent);
/// callers minimizing a loss pass the negated gradient.
class Adam {
 public:
  Adam(std::size_t n, AdamConfig config = {}) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> direction, double lr);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

enum class OptimizerKind { Sgd, Adam };

OptimizerKind optimizer_from_string(std::string_view name);
std::string_view to_string(OptimizerKind kind);

/// Either plain ascent (params += lr * direction) or Adam.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, std::size_t n, AdamConfig adam = {})
      : kind_(kind), adam_(kind == OptimizerKind::Adam ? n : 0, adam) {}

  void step(std::span<double> params, std::span<const double> direction, double lr);

 private:
  OptimizerKind kind_;
  Adam adam_;
};

/// L2 norm.
double l2_norm(std::span<const double> v);

}  // namespace kdpg
