#pragma once

#include "anomale/detectors.hpp"

namespace anomale::detail {

Vector score_with(const PcaState& state, const Matrix& x);
Vector score_with(const IForestState& state, const Matrix& x);
Vector score_with(const CblofState& state, const Matrix& x);
Vector score_with(const HbosState& state, const Matrix& x);

/// Fills threshold from the model's own training scores.
void set_threshold(DetectorModel& model, const Matrix& train);

}  // namespace anomale::detail
