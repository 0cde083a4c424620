// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scalaw/checkpoint.hpp"
#include "scalaw/law.hpp"

namespace scalaw {

/// Size-scaling parameters held at externally supplied values.
struct FrozenParams {
  std::optional<double> A;
  std::optional<double> alpha;

  bool any() const { return A.has_value() || alpha.has_value(); }
  bool both() const { return A.has_value() && alpha.has_value(); }
  bool operator==(const FrozenParams&) const = default;
};

struct FitConfig {
  LossKind loss = LossKind::square();
  FrozenParams frozen;
  int restarts = 32;
  int max_iterations = 2000;
  /// Relative objective decrease below which a local solve stops.
  double tolerance = 1e-10;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const FitConfig&) const = default;
};

struct FitResult {
  LawParams params;
  double objective = 0.0;
  bool converged = false;
  int restarts_tried = 0;
  int n_points = 0;
  /// Iterations used by the winning start and its index in the start list.
  int iterations = 0;
  int best_start = -1;
};

/// Outcome of one local solve from one start.
struct LocalFit {
  LawParams params;
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Deterministic starts: E in {ln 1.5, ln 2.5} x alpha, beta in {0.2, 0.35,
/// 0.5, 0.8}, with A and B solved from two anchor points; then seeded jitter
/// of those starts until `config.restarts` starts exist. Frozen values are
/// substituted. The first k starts do not depend on config.restarts.
std::vector<LawParams> initial_starts(const ScaledFamily& data, const FitConfig& config);

/// One Levenberg-Marquardt solve. Huber objectives use iteratively
/// reweighted Gauss-Newton models; every accepted step strictly decreases the
/// objective.
LocalFit local_fit(const ScaledFamily& data, const LawParams& start, const FitConfig& config);

/// Multi-start fit. Returns the lowest-objective converged local solve (ties:
/// lower alpha + beta, then lower start index); if none converged, the best
/// non-converged one with converged = false. Throws DataError when the data
/// cannot determine the free parameters or mixes loss corpora.
FitResult fit(const ScaledFamily& data, const FitConfig& config = {});

/// alpha or beta outside [kMinExponent, kMaxExponent] marks a fit degenerate.
inline constexpr double kMinExponent = -5.0;
inline constexpr double kMaxExponent = 10.0;

}  // namespace scalaw
