// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scalaw/checkpoint.hpp"
#include "scalaw/fit.hpp"
#include "scalaw/subset.hpp"

namespace scalaw {

// --- configuration grids -----------------------------------------------------

enum class GridAxis {
  kNumModels,      ///< value = k sizes in the training set
  kTrainFraction,  ///< value = q of the token-prefix window
  kScaleUp,        ///< value = 1-based rank of the largest training size
};

const char* axis_name(GridAxis axis);
GridAxis parse_axis(std::string_view name);

struct GridAxes {
  GridAxis row_axis = GridAxis::kNumModels;
  std::vector<double> row_values;
  GridAxis col_axis = GridAxis::kTrainFraction;
  std::vector<double> col_values;
  /// Fields not driven by an axis (cutoff, fixed #models, target fraction).
  SubsetSpec base;
};

inline constexpr const char* kFailInsufficient = "insufficient families";
inline constexpr const char* kFailFewerSizes = "fewer sizes than requested";
inline constexpr const char* kFailNoConverge = "fit did not converge";

struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;
  double row_value = 0.0;
  double col_value = 0.0;
  SubsetSpec spec;
  /// Target max num_params / largest training num_params.
  double scale_up = 0.0;
  /// Distinct sizes in the training set.
  std::size_t num_models = 0;
  /// Present iff the fit converged.
  std::optional<double> are;
  /// Empty on success.
  std::string failure;
  double train_flops = 0.0;
  std::optional<FitResult> fit;
  std::size_t n_train = 0;
  std::size_t n_target = 0;

  bool ok() const { return are.has_value(); }
};

struct GridReport {
  GridAxes axes;
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// Row-major.
  std::vector<GridCell> cells;

  const GridCell& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
};

/// How a cell's training set is built; recorded in report metadata.
inline constexpr const char* kGridConstruction =
    "target = 30%-maximal-token checkpoints of the largest size (target_fraction); "
    "train = remaining sizes, k smallest (or k largest at or below the scale-up size), "
    "checkpoints with tokens_seen <= q * total_tokens, cutoff applied";

/// One fit per axis combination; every cell shares `config` (and so one
/// multi-start schedule). Failed cells are kept with a failure marker. Cells
/// may be evaluated on `threads` workers; the report does not depend on it.
/// Throws DataError when no cell is feasible.
GridReport run_grid(const ScaledFamily& family, const GridAxes& axes, const FitConfig& config,
                    int threads = 1);

// --- iso-FLOP contours -------------------------------------------------------

/// Point in grid index space: x = column index, y = row index (fractional).
struct GridPoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const GridPoint&) const = default;
};

struct ContourLevel {
  double level = 0.0;
  std::vector<std::vector<GridPoint>> polylines;
  /// The whole grid sits at exactly this level.
  bool covers_all = false;
};

/// Marching squares over train_flops with linear edge interpolation; saddles
/// are resolved by the bilinear center value. Levels outside the grid's range
/// yield no polylines. Throws DataError if a cell lacks a finite FLOP count.
std::vector<ContourLevel> iso_flop_contours(std::span<const GridCell> cells, std::size_t rows,
                                            std::size_t cols, std::span<const double> levels);

/// Axis value at fractional index `t` by linear interpolation.
double axis_value_at(std::span<const double> values, double t);

/// `count` levels log-spaced strictly inside the grid's FLOP range.
std::vector<double> default_flop_levels(std::span<const GridCell> cells, int count = 4);

// --- efficiency stars ---------------------------------------------------------

inline constexpr std::array<double, 3> kDefaultStarThresholds = {0.15, 0.10, 0.05};

struct Star {
  double threshold = 0.0;
  /// Index into the cell list; absent when no converged cell qualifies.
  std::optional<std::size_t> cell;
};

/// For each threshold: the converged cell with ARE <= threshold and least
/// train_flops (ties: lower ARE, then fewer models, then lower index).
std::vector<Star> efficiency_stars(std::span<const GridCell> cells,
                                   std::span<const double> thresholds = kDefaultStarThresholds);

// --- leave-one-size-out ------------------------------------------------------

struct CvRow {
  std::int64_t held_out_params = 0;
  std::vector<std::string> model_ids;
  std::optional<double> are;
  std::string failure;
  std::optional<FitResult> fit;
  std::size_t n_train = 0;
  std::size_t n_target = 0;
};

/// For each size below the maximum: train on the family minus the maximal
/// size and minus that size, evaluate on that size's target-fraction tail.
/// Needs >= 4 sizes (DataError otherwise); folds left with too few sizes
/// carry a failure marker.
std::vector<CvRow> loo_family_cv(const ScaledFamily& family, const FitConfig& config,
                                 const SubsetSpec& spec = {});

// --- PCA over fitted parameters ------------------------------------------------

using Vec5d = std::array<double, 5>;

struct PcaReport {
  bool standardized = true;
  Vec5d mean{};
  /// Column scale used before the eigendecomposition (std, or 1).
  Vec5d scale{};
  /// Eigenvectors, descending eigenvalue, sign fixed so the largest-magnitude
  /// entry is positive.
  std::vector<Vec5d> components;
  std::vector<double> eigenvalues;
  std::vector<double> explained_variance_ratio;
  /// Per input fit, coordinates along each component.
  std::vector<Vec5d> scores;
  std::vector<std::pair<double, double>> a_alpha;
  std::vector<std::pair<double, double>> b_beta;
};

/// Eigendecomposition of the covariance (standardize = false) or correlation
/// (standardize = true) matrix of the (E, A, alpha, B, beta) vectors. Throws
/// DataError with fewer than two fits.
PcaReport pca_params(std::span<const LawParams> fits, bool standardize = true);

/// Inverse of the score projection: back to parameter space.
std::vector<Vec5d> pca_reconstruct(const PcaReport& report);

}  // namespace scalaw
