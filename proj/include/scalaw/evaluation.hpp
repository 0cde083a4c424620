// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scalaw/checkpoint.hpp"
#include "scalaw/law.hpp"

namespace scalaw {

/// Smallest relative loss difference practitioners treat as meaningful.
/// Annotation only; reports never gate on it.
inline constexpr double kMeaningfulFloor = 0.04;

struct TargetError {
  std::string model_id;
  std::int64_t seed = 0;
  std::int64_t num_params = 0;
  std::int64_t tokens_seen = 0;
  double observed = 0.0;
  double predicted = 0.0;
  /// Signed: (predicted - observed) / observed.
  double relative_error = 0.0;
};

struct EvalReport {
  /// Mean of |relative_error| over targets.
  double are = 0.0;
  std::vector<TargetError> per_target;
  std::size_t n_targets = 0;
  double meaningful_floor = kMeaningfulFloor;
  /// "law", "best_performance" or "most_trained".
  std::string predictor = "law";
};

/// Absolute relative error of the law on every target checkpoint.
/// Throws DataError on an empty target set.
EvalReport are(const LawParams& params, const ScaledFamily& targets);

/// Constant prediction min_{f in train} L(f).
EvalReport baseline_best_performance(const ScaledFamily& train, const ScaledFamily& targets);

/// Constant prediction: loss of the train record maximizing
/// num_params * tokens_seen (ties: lower loss, then canonical record order).
EvalReport baseline_most_trained(const ScaledFamily& train, const ScaledFamily& targets);

}  // namespace scalaw
