// SPDX-License-Identifier: Apache-2.0
#include "scalaw/subset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scalaw/errors.hpp"

namespace scalaw {

namespace {

void check_fraction(const char* name, double q) {
  if (!(q > 0.0 && q <= 1.0))
    throw UsageError(std::string(name) + " must lie in (0, 1], got " + std::to_string(q));
}

// Sign of t - q * m, exact, for q in [0, 1] and t, m >= 0.
int compare_scaled(std::int64_t t, double q, std::int64_t m) {
  __extension__ using U = unsigned __int128;
  int ex = 0;
  const double f = std::frexp(q, &ex);
  const auto mant = static_cast<std::uint64_t>(std::ldexp(f, 53));
  const int k = 53 - ex;
  const U prod = static_cast<U>(mant) * static_cast<U>(m);
  const U whole = k >= 128 ? U{0} : prod >> k;
  const U rem = k >= 128 ? prod : prod & ((U{1} << k) - 1);
  const auto tt = static_cast<U>(t);
  if (tt > whole) return 1;
  if (tt < whole) return -1;
  return rem == 0 ? 0 : -1;
}

void require_nonempty(const ScaledFamily& family) {
  if (family.empty()) throw DataError("family '" + family.family_id() + "' is empty");
}

}  // namespace

void SubsetSpec::validate() const {
  if (num_models && *num_models < 1) throw UsageError("num_models must be positive");
  if (train_fraction_max) check_fraction("train_fraction_max", *train_fraction_max);
  if (suffix_fraction) check_fraction("suffix_fraction", *suffix_fraction);
  if (cutoff_tokens && *cutoff_tokens < 0) throw UsageError("cutoff_tokens must be >= 0");
  if (max_train_params && *max_train_params < 1)
    throw UsageError("max_train_params must be positive");
  check_fraction("target_fraction", target_fraction);
}

ScaledFamily max_param_family(const ScaledFamily& family) {
  require_nonempty(family);
  const auto top = family.sizes().back();
  return family.filter([&](const CheckpointRecord& r) { return r.num_params == top; });
}

ScaledFamily max_token_family(const ScaledFamily& family, double q) {
  check_fraction("q", q);
  require_nonempty(family);
  std::int64_t max_tokens = 0;
  for (const auto& r : family.records()) max_tokens = std::max(max_tokens, r.tokens_seen);
  return family.filter(
      [&](const CheckpointRecord& r) { return compare_scaled(r.tokens_seen, q, max_tokens) >= 0; });
}

ScaledFamily restrict_train(const ScaledFamily& pool, const SubsetSpec& spec) {
  spec.validate();
  auto sizes = pool.sizes();
  if (spec.max_train_params)
    std::erase_if(sizes, [&](std::int64_t n) { return n > *spec.max_train_params; });
  if (spec.num_models && static_cast<std::size_t>(*spec.num_models) < sizes.size()) {
    const auto k = static_cast<std::size_t>(*spec.num_models);
    if (spec.max_train_params)
      sizes.erase(sizes.begin(), sizes.end() - static_cast<std::ptrdiff_t>(k));
    else
      sizes.resize(k);
  }
  return pool.filter([&](const CheckpointRecord& r) {
    if (!std::binary_search(sizes.begin(), sizes.end(), r.num_params)) return false;
    const auto d = r.tokens_seen;
    const auto total = r.total_tokens;
    if (spec.train_fraction_max && compare_scaled(d, *spec.train_fraction_max, total) > 0)
      return false;
    if (spec.suffix_fraction && compare_scaled(d, 1.0 - *spec.suffix_fraction, total) < 0)
      return false;
    if (spec.cutoff_tokens && r.tokens_seen < *spec.cutoff_tokens) return false;
    return true;
  });
}

Split build_train_target(const ScaledFamily& family, const SubsetSpec& spec) {
  spec.validate();
  require_nonempty(family);
  auto target = max_token_family(max_param_family(family), spec.target_fraction);
  const auto top = family.sizes().back();
  auto pool = family.filter([&](const CheckpointRecord& r) { return r.num_params != top; });
  return {restrict_train(pool, spec), std::move(target)};
}

Split select_train_target(const ScaledFamily& family, const SubsetSpec& spec) {
  auto split = build_train_target(family, spec);
  if (split.train.num_sizes() < kMinTrainSizes)
    throw DataError("insufficient families: " + std::to_string(split.train.num_sizes()) +
                    " training sizes, need at least " + std::to_string(kMinTrainSizes));
  if (split.target.empty()) throw DataError("empty target set");
  return split;
}

Split downscale_split(const ScaledFamily& family, int k, const SubsetSpec& spec) {
  spec.validate();
  require_nonempty(family);
  if (k < 1) throw UsageError("k must be positive");
  const auto sizes = family.sizes();
  if (sizes.size() < static_cast<std::size_t>(k) + 1)
    throw DataError("insufficient families: downscaling with k=" + std::to_string(k) +
                    " needs " + std::to_string(k + 1) + " sizes, found " +
                    std::to_string(sizes.size()));
  const auto smallest = sizes.front();
  const auto cutoff = sizes[sizes.size() - static_cast<std::size_t>(k)];
  auto target = max_token_family(
      family.filter([&](const CheckpointRecord& r) { return r.num_params == smallest; }),
      spec.target_fraction);
  SubsetSpec windows = spec;
  windows.num_models.reset();
  windows.max_train_params.reset();
  auto train = restrict_train(
      family.filter([&](const CheckpointRecord& r) { return r.num_params >= cutoff; }), windows);
  return {std::move(train), std::move(target)};
}

Split transfer_split(const ScaledFamily& family, std::optional<std::int64_t> train_params,
                     const SubsetSpec& spec) {
  spec.validate();
  require_nonempty(family);
  const auto sizes = family.sizes();
  const auto top = sizes.back();
  const auto n = train_params.value_or(sizes.size() > 1 ? sizes[sizes.size() - 2] : top);
  if (!std::binary_search(sizes.begin(), sizes.end(), n))
    throw DataError("no run with num_params=" + std::to_string(n) + " in family '" +
                    family.family_id() + "'");
  auto target = max_token_family(max_param_family(family), spec.target_fraction);
  SubsetSpec windows = spec;
  windows.num_models.reset();
  windows.max_train_params.reset();
  auto train = restrict_train(
      family.filter([&](const CheckpointRecord& r) { return r.num_params == n; }), windows);
  if (n == top) {
    const auto targets = target.records();
    train = train.filter([&](const CheckpointRecord& r) {
      return std::find(targets.begin(), targets.end(), r) == targets.end();
    });
  }
  return {std::move(train), std::move(target)};
}

double train_flops(const ScaledFamily& train) {
  double total = 0.0;
  for (const auto& run : train.runs()) {
    const auto last = std::max_element(
        run.records.begin(), run.records.end(),
        [](const auto& a, const auto& b) { return a.tokens_seen < b.tokens_seen; });
    total += last->flops ? *last->flops
                         : 6.0 * static_cast<double>(run.num_params) *
                               static_cast<double>(last->tokens_seen);
  }
  return total;
}

}  // namespace scalaw
