#include "kdpg/optimizer.hpp"

#include <cmath>
#include <string>

#include "kdpg/error.hpp"

namespace kdpg {

void Adam::step(std::span<double> params, std::span<const double> direction, double lr) {
  if (params.size() != m_.size() || direction.size() != m_.size()) {
    throw Error("ShapeMismatch", "Adam state size");
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = direction[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    params[i] += lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
  }
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

void Optimizer::step(std::span<double> params, std::span<const double> direction, double lr) {
  if (kind_ == OptimizerKind::Adam) {
    adam_.step(params, direction, lr);
    return;
  }
  if (params.size() != direction.size()) throw Error("ShapeMismatch", "direction size");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += lr * direction[i];
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace kdpg
