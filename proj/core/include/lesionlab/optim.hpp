#pragma once

#include <string>
#include <vector>

#include "lesionlab/autodiff.hpp"
#include "lesionlab/params.hpp"

namespace lesionlab {

enum class UpdateRule { sgd, adamw };

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::adamw;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// SGD or AdamW. Decoupled weight decay is applied to matrices only.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Applies one update. Parameters absent from `grads` are left alone.
  /// A non-finite gradient aborts the step before anything is modified and
  /// raises NumericError naming the parameter.
  void step(ParameterStore& params, const Gradients& grads);

  const OptimizerConfig& config() const noexcept { return config_; }
  /// Schedules adjust the rate between steps; must stay > 0.
  void set_learning_rate(double lr);
  std::size_t steps_taken() const noexcept { return steps_; }
  /// Human-readable rule for run metadata, e.g. "adamw(lr=0.001,...)".
  std::string describe() const;

 private:
  OptimizerConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Plain SGD update `w -= lr * g` on a single parameter store.
void sgd_step(ParameterStore& params, const Gradients& grads, double learning_rate);

}  // namespace lesionlab
