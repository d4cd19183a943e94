#include "drgrl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drgrl/errors.hpp"

namespace drgrl {

std::string_view ToString(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "sgd";
}

OptimizerKind ParseOptimizerKind(std::string_view name) {
  if (name == "adam" || name == "adamw") return OptimizerKind::kAdam;
  if (name == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerConfig cfg, std::size_t n_params) : cfg_(cfg) {
  if (cfg_.kind == OptimizerKind::kAdam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::Reset() {
  std::fill(m_.begin(), m_.end(), 0.0);
  std::fill(v_.begin(), v_.end(), 0.0);
  t_ = 0;
}

void Optimizer::Step(std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != grad.size()) throw Error("optimizer: gradient size mismatch");
  ++t_;
  if (cfg_.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= lr * (grad[i] + cfg_.weight_decay * theta[i]);
    }
    return;
  }
  if (m_.size() != theta.size()) throw Error("optimizer: parameter count changed");
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.epsilon) + cfg_.weight_decay * theta[i]);
  }
}

}  // namespace drgrl
