#include "lesionlab/optim.hpp"

#include <cmath>
#include <sstream>

#include "lesionlab/errors.hpp"

namespace lesionlab {

namespace {
void check_finite(const ParameterStore& params, const Gradients& grads) {
  for (const auto& [id, g] : grads) {
    if (id >= params.size()) throw LookupError("gradient for unknown parameter id " + std::to_string(id));
    if (g.shape() != params.tensor(id).shape()) {
      throw ConfigError("gradient shape " + shape_to_string(g.shape()) + " does not match parameter " +
                        params.name(id) + " " + shape_to_string(params.tensor(id).shape()));
    }
    if (!g.all_finite()) throw NumericError("non-finite gradient for parameter " + params.name(id));
  }
}
}  // namespace

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

void Optimizer::step(ParameterStore& params, const Gradients& grads) {
  check_finite(params, grads);
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.rule == UpdateRule::sgd) {
    for (const auto& [id, g] : grads) {
      Tensor& w = params.tensor(id);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
    }
    return;
  }
  if (m_.size() < params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (const auto& [id, g] : grads) {
    Tensor& w = params.tensor(id);
    if (m_[id].size() == 0) {
      m_[id] = Tensor(w.shape());
      v_[id] = Tensor(w.shape());
    }
    Tensor& m = m_[id];
    Tensor& v = v_[id];
    const double decay = w.rank() >= 2 ? config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
      w[i] -= lr * (update + decay * w[i]);
    }
  }
}

void Optimizer::set_learning_rate(double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  config_.learning_rate = lr;
}

std::string Optimizer::describe() const {
  std::ostringstream out;
  out.precision(17);
  if (config_.rule == UpdateRule::sgd) {
    out << "sgd(lr=" << config_.learning_rate << ")";
  } else {
    out << "adamw(lr=" << config_.learning_rate << ",beta1=" << config_.beta1 << ",beta2=" << config_.beta2
        << ",eps=" << config_.epsilon << ",weight_decay=" << config_.weight_decay << ")";
  }
  return out.str();
}

void sgd_step(ParameterStore& params, const Gradients& grads, double learning_rate) {
  Optimizer opt({.rule = UpdateRule::sgd, .learning_rate = learning_rate});
  opt.step(params, grads);
}

}  // namespace lesionlab
