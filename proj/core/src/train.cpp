#include "lesionlab/train.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"
#include "lesionlab/rng.hpp"

namespace lesionlab {

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total) {
  const double peak = config.optimizer.learning_rate;
  if (step < config.warmup_steps) {
    return peak * static_cast<double>(step + 1) / static_cast<double>(config.warmup_steps);
  }
  if (total <= config.warmup_steps + 1) return peak;
  const double progress =
      static_cast<double>(step - config.warmup_steps) / static_cast<double>(total - config.warmup_steps - 1);
  const double floor = config.final_lr_fraction;
  return peak * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

TrainReport pretrain(Model& model, std::span<const std::vector<int>> sequences, const TrainConfig& config,
                     const StepCallback& on_step) {
  if (sequences.empty()) throw InputError("training corpus is empty");
  if (config.batch_size == 0 || config.epochs == 0) throw ConfigError("batch_size and epochs must be >= 1");
  Optimizer opt(config.optimizer);
  TrainReport report;
  report.update_rule = opt.describe();
  const std::size_t per_epoch = (sequences.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;

  std::vector<std::size_t> order(sequences.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, "pretrain-epoch", std::to_string(epoch)));
    rng.shuffle(std::span(order));
    for (std::size_t b = 0; b < per_epoch; ++b) {
      std::vector<std::vector<int>> batch_seqs;
      for (std::size_t i = b * config.batch_size; i < std::min(order.size(), (b + 1) * config.batch_size); ++i) {
        batch_seqs.push_back(sequences[order[i]]);
      }
      const Batch batch = make_batch(batch_seqs);
      Graph g;
      const Var loss = forward_loss(g, model, batch);
      const double value = g.value(loss).item();
      const Gradients grads = g.backward(loss);
      opt.set_learning_rate(scheduled_lr(config, report.steps, total));
      opt.step(model.params(), grads);
      report.losses.push_back(value);
      ++report.steps;
      if (on_step) on_step(report.steps, value);
    }
  }
  return report;
}

}  // namespace lesionlab
