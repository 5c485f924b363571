#include "anomale/adam.hpp"

#include <cmath>

namespace anomale {

AdamState::AdamState(const AdamConfig& cfg, const std::vector<NamedMatrix>& params) : config(cfg) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  for (const auto& p : params) {
    first_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    second_moment.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void adam_step(std::vector<NamedMatrix>& params, const std::vector<Matrix>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
        state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols()) {
      throw ShapeError("adam_step: shape mismatch for parameter '" + params[i].name + "'");
    }
    if (!grads[i].allFinite()) throw NonFiniteGradient(params[i].name);
  }

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    params[i].value.array() -=
        c.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

}  // namespace anomale
