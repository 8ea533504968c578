#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lesionlab/model.hpp"
#include "lesionlab/optim.hpp"

namespace lesionlab {

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer{};
  /// Linear warm-up, then cosine decay to `final_lr_fraction` of the peak.
  std::size_t warmup_steps = 0;
  double final_lr_fraction = 1.0;
  std::uint64_t seed = 0;
};

struct TrainReport {
  std::size_t steps = 0;
  std::vector<double> losses;
  std::string update_rule;
};

/// Called after every optimizer step with (step, loss).
using StepCallback = std::function<void(std::size_t, double)>;

/// Next-token training over shuffled mini-batches of token sequences.
TrainReport pretrain(Model& model, std::span<const std::vector<int>> sequences, const TrainConfig& config,
                     const StepCallback& on_step = {});

/// Learning rate for `step` (0-based) of `total` under the schedule.
double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total);

}  // namespace lesionlab
