// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scalaw/checkpoint.hpp"
#include "scalaw/law.hpp"

namespace scalaw {

/// Additive early-training distortion amplitude * (1 - D / span) for D < span,
/// zero afterwards.
struct WarmupBump {
  double amplitude = 0.0;
  std::int64_t span_tokens = 0;

  double at(std::int64_t tokens) const;
  bool operator==(const WarmupBump&) const = default;
};

struct SynthSpec {
  std::string family_id = "synthetic";
  LawParams truth;
  /// num_params of each size; distinct.
  std::vector<std::int64_t> sizes;
  /// One entry for all sizes, or one per size.
  std::vector<std::int64_t> tokens_per_run;
  /// Checkpoints per run, log-uniformly spaced in tokens_seen and ending at
  /// the run's total.
  int checkpoints_per_run = 20;
  /// First checkpoint sits at this fraction of the run's tokens.
  double min_token_fraction = 0.01;
  /// Independent runs (distinct seeds) per size.
  int runs_per_size = 1;
  /// Per-checkpoint multiplicative log-normal noise.
  double noise_sigma = 0.0;
  /// Per-run multiplicative log-normal offset.
  double seed_sigma = 0.0;
  std::optional<WarmupBump> warmup_bump;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Deterministic given rng_seed:
///   loss(N, D) = eval_law(truth, N, D) * exp(eps_run) * exp(eps_ckpt) + bump(D).
/// Noise draws do not depend on the bump, so records past the bump span match
/// the bump-free family exactly.
ScaledFamily generate(const SynthSpec& spec);

/// Token schedule of one run: `count` distinct values, log-uniform from
/// min_fraction * total to total.
std::vector<std::int64_t> checkpoint_schedule(std::int64_t total, int count, double min_fraction);

/// `count` sizes log-spaced between lo and hi inclusive, rounded to integers.
std::vector<std::int64_t> log_spaced_sizes(double lo, double hi, int count);

}  // namespace scalaw
