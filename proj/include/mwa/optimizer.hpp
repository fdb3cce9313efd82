#pragma once

#include <cmath>

#include "mwa/model.hpp"

namespace mwa {

struct OptimizerState {
  ModelParameters first_moment;
  ModelParameters second_moment;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerState for_model(const ModelConfig& config) {
    return OptimizerState{ModelParameters::zeros(config), ModelParameters::zeros(config)};
  }
};

/// One Adam step with decoupled weight decay:
///   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
inline void adam_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& state,
                      double learning_rate, double weight_decay) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - learning_rate * weight_decay;

  auto theta = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (Eigen::Index e = 0; e < theta[k].size(); ++e) {
      const double grad = g[k].data[e];
      double& mk = m[k].data[e];
      double& vk = v[k].data[e];
      mk = state.beta1 * mk + (1.0 - state.beta1) * grad;
      vk = state.beta2 * vk + (1.0 - state.beta2) * grad * grad;
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      theta[k].data[e] = theta[k].data[e] * decay - learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace mwa
