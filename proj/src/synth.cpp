// SPDX-License-Identifier: Apache-2.0
#include "scalaw/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "scalaw/errors.hpp"

namespace scalaw {

double WarmupBump::at(std::int64_t tokens) const {
  if (tokens >= span_tokens || span_tokens <= 0) return 0.0;
  return amplitude * (1.0 - static_cast<double>(tokens) / static_cast<double>(span_tokens));
}

void SynthSpec::validate() const {
  if (!truth.all_finite()) throw UsageError("truth parameters must be finite");
  if (sizes.empty()) throw UsageError("at least one size is required");
  std::set<std::int64_t> distinct(sizes.begin(), sizes.end());
  if (distinct.size() != sizes.size()) throw UsageError("sizes must be distinct");
  if (*distinct.begin() < 1) throw UsageError("sizes must be positive");
  if (tokens_per_run.size() != 1 && tokens_per_run.size() != sizes.size())
    throw UsageError("tokens_per_run needs one value or one per size");
  for (auto t : tokens_per_run)
    if (t < 1) throw UsageError("tokens_per_run must be positive");
  if (checkpoints_per_run < 1) throw UsageError("checkpoints_per_run must be >= 1");
  if (!(min_token_fraction > 0.0 && min_token_fraction <= 1.0))
    throw UsageError("min_token_fraction must lie in (0, 1]");
  if (runs_per_size < 1) throw UsageError("runs_per_size must be >= 1");
  if (!(noise_sigma >= 0.0) || !(seed_sigma >= 0.0))
    throw UsageError("noise sigmas must be nonnegative");
  if (warmup_bump && warmup_bump->span_tokens < 1)
    throw UsageError("warmup span must be positive");
}

std::vector<std::int64_t> checkpoint_schedule(std::int64_t total, int count, double min_fraction) {
  std::vector<std::int64_t> out;
  if (count == 1) return {total};
  const double lo = std::log(std::max(1.0, min_fraction * static_cast<double>(total)));
  const double hi = std::log(static_cast<double>(total));
  for (int j = 0; j < count; ++j) {
    const double t = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
    auto v = static_cast<std::int64_t>(std::llround(std::exp(t)));
    v = std::clamp<std::int64_t>(v, 1, total);
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  out.back() = total;
  return out;
}

std::vector<std::int64_t> log_spaced_sizes(double lo, double hi, int count) {
  std::vector<std::int64_t> out;
  for (int j = 0; j < count; ++j) {
    const double t = count == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(count - 1);
    out.push_back(std::llround(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))));
  }
  return out;
}

ScaledFamily generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CheckpointRecord> records;
  for (std::size_t s = 0; s < spec.sizes.size(); ++s) {
    const auto n = spec.sizes[s];
    const auto total = spec.tokens_per_run.size() == 1 ? spec.tokens_per_run[0]
                                                        : spec.tokens_per_run[s];
    const auto schedule =
        checkpoint_schedule(total, spec.checkpoints_per_run, spec.min_token_fraction);
    for (int rep = 0; rep < spec.runs_per_size; ++rep) {
      const double run_scale = std::exp(spec.seed_sigma * normal(rng));
      for (auto d : schedule) {
        const double ckpt_scale = std::exp(spec.noise_sigma * normal(rng));
        CheckpointRecord r;
        r.family_id = spec.family_id;
        r.model_id = spec.family_id + "-" + std::to_string(n);
        r.num_params = n;
        r.tokens_seen = d;
        r.total_tokens = total;
        if (spec.runs_per_size > 1) r.seed = rep;
        r.loss = eval_law(spec.truth, static_cast<double>(n), static_cast<double>(d)) *
                 run_scale * ckpt_scale;
        if (spec.warmup_bump) r.loss += spec.warmup_bump->at(d);
        records.push_back(std::move(r));
      }
    }
  }
  return ScaledFamily(spec.family_id, std::move(records));
}

}  // namespace scalaw
