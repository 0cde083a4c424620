// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

#include "scalaw/checkpoint.hpp"

namespace scalaw {

inline constexpr double kDefaultTargetFraction = 0.3;
inline constexpr std::int64_t kDefaultCutoffTokens = 10'000'000'000;
/// A law is only estimated from at least this many distinct model sizes.
inline constexpr std::size_t kMinTrainSizes = 3;

/// Which checkpoints enter a training set. Every field is optional; an empty
/// spec keeps the full trajectories of every non-target size.
struct SubsetSpec {
  /// Use k sizes: the k smallest, or the k largest at or below
  /// `max_train_params` when that cap is set.
  std::optional<int> num_models;
  /// Keep checkpoints with tokens_seen <= q * total_tokens.
  std::optional<double> train_fraction_max;
  /// Keep checkpoints with tokens_seen >= (1 - q) * total_tokens.
  std::optional<double> suffix_fraction;
  /// Drop checkpoints with tokens_seen < cutoff.
  std::optional<std::int64_t> cutoff_tokens;
  /// Only sizes with num_params <= cap train.
  std::optional<std::int64_t> max_train_params;
  /// q of the q-maximal-token target family.
  double target_fraction = kDefaultTargetFraction;

  /// Throws UsageError on fractions outside (0, 1] or nonpositive counts.
  void validate() const;

  bool operator==(const SubsetSpec&) const = default;
};

struct Split {
  ScaledFamily train;
  ScaledFamily target;
};

/// Records at the largest num_params. Throws DataError on an empty family.
ScaledFamily max_param_family(const ScaledFamily& family);

/// Records with tokens_seen >= q * (max tokens_seen over the family). Fraction
/// comparisons here and in the training windows are exact.
/// Throws UsageError for q outside (0, 1], DataError on an empty family.
ScaledFamily max_token_family(const ScaledFamily& family, double q);

/// Applies size selection then token windows of `spec` to a training pool.
/// Does not check the minimum-size requirement.
ScaledFamily restrict_train(const ScaledFamily& pool, const SubsetSpec& spec);

/// The upscaling split without the >= 3 sizes check: target is the
/// q-maximal-token tail of the maximal-parameter family, train is everything
/// else narrowed by `spec`. Throws only when the target would be empty.
Split build_train_target(const ScaledFamily& family, const SubsetSpec& spec);

/// build_train_target plus the estimation precondition. Throws DataError
/// "insufficient families" when fewer than three sizes remain in train.
Split select_train_target(const ScaledFamily& family, const SubsetSpec& spec = {});

/// Train on the k largest sizes, target the tail of the smallest size.
/// `spec` token windows apply to train; its size fields are ignored.
Split downscale_split(const ScaledFamily& family, int k, const SubsetSpec& spec = {});

/// Single-size training set for frozen-(A, alpha) transfer. Train is the run(s)
/// at `train_params` (default: the largest size below the maximum, or the
/// maximal size itself when it is the only one) narrowed by `spec` token
/// windows; target is the maximal-parameter tail. When training on the target
/// size, target checkpoints are removed from train.
Split transfer_split(const ScaledFamily& family, std::optional<std::int64_t> train_params,
                     const SubsetSpec& spec = {});

/// Total training compute of a set: per run, 6 * N * (max tokens_seen in the
/// set), or the ingested flops of that checkpoint when present.
double train_flops(const ScaledFamily& train);

}  // namespace scalaw
