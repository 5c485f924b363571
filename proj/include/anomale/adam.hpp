#pragma once

#include "anomale/linalg.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anomale {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

struct AdamConfig {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient for parameter '" + param + "'"), param_(param) {}
  const std::string& parameter() const { return param_; }

 private:
  std::string param_;
};

/// First/second moment estimates, one pair per parameter, shaped like it.
struct AdamState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, const std::vector<NamedMatrix>& params);
};

/// One bias-corrected Adam update. Every gradient is checked before any
/// parameter is touched, so a NonFiniteGradient leaves params and state intact.
void adam_step(std::vector<NamedMatrix>& params, const std::vector<Matrix>& grads, AdamState& state);

}  // namespace anomale
