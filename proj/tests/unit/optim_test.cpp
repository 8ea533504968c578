#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lesionlab/autodiff.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/optim.hpp"
#include "lesionlab/params.hpp"
#include "lesionlab/train.hpp"

namespace lesionlab {
namespace {

OptimizerConfig sgd(double lr) {
  OptimizerConfig c;
  c.rule = UpdateRule::sgd;
  c.learning_rate = lr;
  c.weight_decay = 0.0;
  return c;
}

TEST(Optimizer, SgdStep) {
  ParameterStore p;
  const ParamId w = p.add("w", Tensor({1}, {1.0}));
  Optimizer(sgd(0.1)).step(p, {{w, Tensor({1}, {2.0})}});
  EXPECT_DOUBLE_EQ(p.tensor(w)[0], 0.8);
}

TEST(Optimizer, ZeroGradientLeavesWeight) {
  ParameterStore p;
  const ParamId w = p.add("w", Tensor({2}, {1.5, -3.0}));
  Optimizer opt(sgd(0.1));
  opt.step(p, {{w, Tensor({2}, 0.0)}});
  EXPECT_EQ(p.tensor(w), Tensor({2}, {1.5, -3.0}));
}

TEST(Optimizer, NonFiniteGradientAbortsBeforeAnyUpdate) {
  ParameterStore p;
  const ParamId a = p.add("a", Tensor({1}, {1.0}));
  const ParamId b = p.add("b", Tensor({1}, {1.0}));
  Optimizer opt(OptimizerConfig{});
  const Gradients grads{{a, Tensor({1}, {0.5})}, {b, Tensor({1}, {std::numeric_limits<double>::quiet_NaN()})}};
  try {
    opt.step(p, grads);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find('b'), std::string::npos);
  }
  EXPECT_EQ(p.tensor(a)[0], 1.0);
  EXPECT_EQ(opt.steps_taken(), 0u);
}

TEST(Optimizer, LeastSquaresLossDecreasesMonotonically) {
  ParameterStore p;
  const ParamId w = p.add("w", Tensor({1, 1}, {-1.0}));
  const Tensor x({4, 1}, {0.5, 1.0, -1.5, 2.0});
  const Tensor neg_y({4, 1}, {-1.0, -2.0, 3.0, -4.0});  // targets y = 2x
  Optimizer opt(sgd(0.05));
  std::vector<double> losses;
  for (int step = 0; step < 50; ++step) {
    Graph g;
    const Var diff = g.add(g.matmul(g.constant(x), g.parameter(w, p.tensor(w))), g.constant(neg_y));
    const Var loss = g.scale(g.sum(g.mul(diff, diff)), 0.25);
    losses.push_back(g.value(loss).item());
    opt.step(p, g.backward(loss));
  }
  for (std::size_t i = 6; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]) << "step " << i;
  EXPECT_NEAR(p.tensor(w)[0], 2.0, 1e-3);
}

TEST(Schedule, WarmupThenCosineToFloor) {
  TrainConfig c;
  c.optimizer.learning_rate = 1.0;
  c.warmup_steps = 10;
  c.final_lr_fraction = 0.1;
  EXPECT_NEAR(scheduled_lr(c, 0, 100), 0.1, 1e-12);
  EXPECT_NEAR(scheduled_lr(c, 9, 100), 1.0, 1e-12);
  EXPECT_NEAR(scheduled_lr(c, 99, 100), 0.1, 1e-3);
  for (std::size_t s = 10; s < 99; ++s) EXPECT_GE(scheduled_lr(c, s, 100), scheduled_lr(c, s + 1, 100));
}

}  // namespace
}  // namespace lesionlab
