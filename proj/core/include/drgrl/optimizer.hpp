#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace drgrl {

enum class OptimizerKind { kAdam, kSgd };

std::string_view ToString(OptimizerKind kind);
OptimizerKind ParseOptimizerKind(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style) decay; also applied as plain L2 shrink for SGD.
  double weight_decay = 0.0;
};

// Minimizes: Step() moves theta against `grad`.
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, std::size_t n_params);

  void Step(std::span<double> theta, std::span<const double> grad, double lr);
  void Reset();

  const OptimizerConfig& config() const { return cfg_; }
  long step_count() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace drgrl
