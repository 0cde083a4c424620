// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scalaw {

/// One observed checkpoint of one training run. Counts are stored raw (not in
/// billions); normalization happens inside the estimator only.
struct CheckpointRecord {
  std::string family_id;
  std::string model_id;
  std::int64_t num_params = 0;
  std::int64_t tokens_seen = 0;
  std::int64_t total_tokens = 0;
  std::optional<std::int64_t> seed;
  double loss = 0.0;
  std::optional<double> flops;
  std::string loss_corpus;

  std::int64_t seed_or_default() const { return seed.value_or(0); }

  bool operator==(const CheckpointRecord&) const = default;
};

/// A training run is identified by (model_id, seed); an absent seed is 0.
struct RunKey {
  std::string model_id;
  std::int64_t seed = 0;

  auto operator<=>(const RunKey&) const = default;
};

RunKey run_key(const CheckpointRecord& r);

/// Strict weak order used for every record listing: model_id, seed, corpus,
/// tokens_seen.
bool canonical_less(const CheckpointRecord& a, const CheckpointRecord& b);

/// All checkpoints of one run, as a view into the owning family.
struct RunView {
  RunKey key;
  std::int64_t num_params = 0;
  std::int64_t total_tokens = 0;
  std::span<const CheckpointRecord> records;
};

/// Records sharing one family_id, kept in canonical order. Immutable after
/// construction; every constructor validates the family invariants.
class ScaledFamily {
 public:
  ScaledFamily() = default;
  /// Throws DataError if records disagree on family_id, if a run mixes sizes
  /// or total_tokens, or if one checkpoint appears twice with different losses.
  /// Exact duplicates are collapsed.
  ScaledFamily(std::string family_id, std::vector<CheckpointRecord> records);

  const std::string& family_id() const { return family_id_; }
  std::span<const CheckpointRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Distinct num_params values, ascending.
  std::vector<std::int64_t> sizes() const;
  std::size_t num_sizes() const { return sizes().size(); }
  /// Runs in canonical (model_id, seed) order.
  std::vector<RunView> runs() const;
  /// Distinct loss_corpus labels (the empty label included), sorted.
  std::vector<std::string> corpora() const;

  template <class Pred>
  ScaledFamily filter(Pred&& keep) const {
    std::vector<CheckpointRecord> out;
    for (const auto& r : records_)
      if (keep(r)) out.push_back(r);
    return ScaledFamily(family_id_, std::move(out));
  }

  bool operator==(const ScaledFamily&) const = default;

 private:
  std::string family_id_;
  std::vector<CheckpointRecord> records_;
};

enum class TableFormat { kCsv, kJsonl };

/// Column names, in serialization order.
inline constexpr std::string_view kColumns[] = {
    "family_id", "model_id", "num_params",  "tokens_seen", "total_tokens",
    "seed",      "loss",     "flops",       "loss_corpus"};

/// Parses a checkpoint table. Row order is irrelevant; one family per
/// distinct family_id, returned sorted by family_id.
std::vector<ScaledFamily> ingest(std::istream& in, TableFormat format);
std::vector<ScaledFamily> ingest_string(std::string_view text, TableFormat format);
/// Format from extension: .jsonl/.json -> JSONL, anything else CSV.
std::vector<ScaledFamily> ingest_file(const std::filesystem::path& path);
TableFormat format_for_path(const std::filesystem::path& path);

void serialize(std::ostream& out, std::span<const ScaledFamily> families,
               TableFormat format);
std::string serialize_string(std::span<const ScaledFamily> families,
                             TableFormat format);

struct FamilySummary {
  std::string family_id;
  std::size_t num_runs = 0;
  std::size_t num_sizes = 0;
  std::size_t num_checkpoints = 0;
  std::int64_t min_params = 0;
  std::int64_t max_params = 0;
  std::int64_t min_tokens = 0;
  std::int64_t max_tokens = 0;
  std::vector<std::string> corpora;
};

FamilySummary family_summary(const ScaledFamily& family);

/// Keeps only records evaluated on `corpus`.
ScaledFamily select_corpus(const ScaledFamily& family, std::string_view corpus);

/// Throws DataError when the family holds losses from more than one corpus.
void require_single_corpus(const ScaledFamily& family);

}  // namespace scalaw
