// SPDX-License-Identifier: Apache-2.0
#include "scalaw/meta.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <thread>

#include "scalaw/errors.hpp"
#include "scalaw/evaluation.hpp"

namespace scalaw {

const char* axis_name(GridAxis axis) {
  switch (axis) {
    case GridAxis::kNumModels: return "num_models";
    case GridAxis::kTrainFraction: return "train_fraction";
    case GridAxis::kScaleUp: return "scale_up";
  }
  return "?";
}

GridAxis parse_axis(std::string_view name) {
  if (name == "num_models" || name == "models") return GridAxis::kNumModels;
  if (name == "train_fraction" || name == "fraction") return GridAxis::kTrainFraction;
  if (name == "scale_up" || name == "scale") return GridAxis::kScaleUp;
  throw UsageError("unknown grid axis '" + std::string(name) + "'");
}

namespace {

// Applies one axis value; returns a failure message when the value cannot be
// realized on this family.
std::string apply_axis(GridAxis axis, double value, const std::vector<std::int64_t>& pool_sizes,
                       SubsetSpec& spec) {
  switch (axis) {
    case GridAxis::kNumModels:
      if (value < 1 || value != std::floor(value)) throw UsageError("num_models axis needs integers >= 1");
      spec.num_models = static_cast<int>(value);
      return {};
    case GridAxis::kTrainFraction:
      spec.train_fraction_max = value;
      return {};
    case GridAxis::kScaleUp: {
      if (value < 1 || value != std::floor(value)) throw UsageError("scale_up axis needs size ranks >= 1");
      const auto rank = static_cast<std::size_t>(value);
      if (rank > pool_sizes.size()) return "no training size at rank " + std::to_string(rank);
      spec.max_train_params = pool_sizes[rank - 1];
      return {};
    }
  }
  return {};
}

void evaluate_cell(const ScaledFamily& family, const std::vector<std::int64_t>& pool_sizes,
                   const GridAxes& axes, const FitConfig& config, GridCell& cell) {
  cell.spec = axes.base;
  auto fail = apply_axis(axes.row_axis, cell.row_value, pool_sizes, cell.spec);
  if (fail.empty()) fail = apply_axis(axes.col_axis, cell.col_value, pool_sizes, cell.spec);
  if (!fail.empty()) {
    cell.failure = fail;
    cell.train_flops = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const auto split = build_train_target(family, cell.spec);
  cell.n_train = split.train.size();
  cell.n_target = split.target.size();
  cell.num_models = split.train.num_sizes();
  cell.train_flops = train_flops(split.train);
  if (!split.train.empty())
    cell.scale_up = static_cast<double>(split.target.sizes().back()) /
                    static_cast<double>(split.train.sizes().back());
  if (cell.num_models < kMinTrainSizes) {
    cell.failure = kFailInsufficient;
    return;
  }
  if (cell.spec.num_models && cell.num_models < static_cast<std::size_t>(*cell.spec.num_models)) {
    cell.failure = kFailFewerSizes;
    return;
  }
  try {
    cell.fit = fit(split.train, config);
    if (!cell.fit->converged) {
      cell.failure = kFailNoConverge;
      return;
    }
    cell.are = are(cell.fit->params, split.target).are;
  } catch (const Error& e) {
    cell.failure = e.what();
  }
}

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

GridReport run_grid(const ScaledFamily& family, const GridAxes& axes, const FitConfig& config,
                    int threads) {
  config.validate();
  axes.base.validate();
  if (axes.row_axis == axes.col_axis) throw UsageError("grid axes must differ");
  if (axes.row_values.empty() || axes.col_values.empty())
    throw UsageError("grid axes need at least one value each");
  if (family.empty()) throw DataError("family '" + family.family_id() + "' is empty");

  const auto sizes = family.sizes();
  const std::vector<std::int64_t> pool_sizes(sizes.begin(), sizes.end() - 1);

  GridReport rep;
  rep.axes = axes;
  rep.rows = axes.row_values.size();
  rep.cols = axes.col_values.size();
  rep.cells.resize(rep.rows * rep.cols);
  for (std::size_t r = 0; r < rep.rows; ++r)
    for (std::size_t c = 0; c < rep.cols; ++c) {
      auto& cell = rep.cells[r * rep.cols + c];
      cell.row = r;
      cell.col = c;
      cell.row_value = axes.row_values[r];
      cell.col_value = axes.col_values[c];
    }
  parallel_for(rep.cells.size(), threads,
               [&](std::size_t i) { evaluate_cell(family, pool_sizes, axes, config, rep.cells[i]); });

  const bool any_feasible = std::any_of(rep.cells.begin(), rep.cells.end(), [](const GridCell& c) {
    return c.failure != kFailInsufficient && c.failure != kFailFewerSizes &&
           !c.failure.starts_with("no training size");
  });
  if (!any_feasible) throw DataError("no feasible grid cell: insufficient families");
  return rep;
}

// --- contours ----------------------------------------------------------------

double axis_value_at(std::span<const double> values, double t) {
  if (values.empty()) return 0.0;
  if (values.size() == 1) return values[0];
  t = std::clamp(t, 0.0, static_cast<double>(values.size() - 1));
  const auto i = std::min(static_cast<std::size_t>(t), values.size() - 2);
  const double f = t - static_cast<double>(i);
  return values[i] + f * (values[i + 1] - values[i]);
}

std::vector<double> default_flop_levels(std::span<const GridCell> cells, int count) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& c : cells)
    if (std::isfinite(c.train_flops) && c.train_flops > 0.0) {
      lo = std::min(lo, c.train_flops);
      hi = std::max(hi, c.train_flops);
    }
  std::vector<double> out;
  if (!(hi > lo)) return out;
  for (int j = 1; j <= count; ++j)
    out.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * j / (count + 1)));
  return out;
}

namespace {

// Edge ids: horizontal edge between (r, c) and (r, c+1) and vertical edge
// between (r, c) and (r+1, c).
struct EdgeId {
  bool vertical = false;
  std::size_t r = 0;
  std::size_t c = 0;
  auto operator<=>(const EdgeId&) const = default;
};

std::vector<std::vector<GridPoint>> chain(const std::vector<std::pair<EdgeId, EdgeId>>& segments,
                                          const std::map<EdgeId, GridPoint>& points) {
  std::map<EdgeId, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].first].push_back(s);
    incident[segments[s].second].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<GridPoint>> out;
  auto walk = [&](EdgeId start) {
    std::vector<GridPoint> line{points.at(start)};
    EdgeId cur = start;
    for (;;) {
      std::optional<std::size_t> next;
      for (auto s : incident[cur])
        if (!used[s]) {
          next = s;
          break;
        }
      if (!next) break;
      used[*next] = true;
      cur = segments[*next].first == cur ? segments[*next].second : segments[*next].first;
      line.push_back(points.at(cur));
    }
    out.push_back(std::move(line));
  };
  // Open chains start at grid-boundary ends (degree 1); the rest are loops.
  for (const auto& [edge, segs] : incident)
    if (segs.size() == 1 && !used[segs[0]]) walk(edge);
  for (std::size_t s = 0; s < segments.size(); ++s)
    if (!used[s]) walk(segments[s].first);
  return out;
}

}  // namespace

std::vector<ContourLevel> iso_flop_contours(std::span<const GridCell> cells, std::size_t rows,
                                            std::size_t cols, std::span<const double> levels) {
  if (cells.size() != rows * cols) throw UsageError("cell count does not match grid shape");
  for (const auto& c : cells)
    if (!std::isfinite(c.train_flops))
      throw DataError("grid cell (" + std::to_string(c.row) + ", " + std::to_string(c.col) +
                      ") has no FLOP count");
  auto v = [&](std::size_t r, std::size_t c) { return cells[r * cols + c].train_flops; };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : cells) {
    lo = std::min(lo, c.train_flops);
    hi = std::max(hi, c.train_flops);
  }

  std::vector<ContourLevel> out;
  for (double level : levels) {
    ContourLevel cl;
    cl.level = level;
    if (cells.empty() || level < lo || level > hi) {
      out.push_back(std::move(cl));
      continue;
    }
    if (lo == hi) {
      cl.covers_all = true;
      const double X = static_cast<double>(cols - 1), Y = static_cast<double>(rows - 1);
      cl.polylines.push_back({{0, 0}, {X, 0}, {X, Y}, {0, Y}, {0, 0}});
      out.push_back(std::move(cl));
      continue;
    }
    auto above = [&](double x) { return x >= level; };
    std::map<EdgeId, GridPoint> points;
    auto crossing = [&](EdgeId e) -> std::optional<EdgeId> {
      const double a = v(e.r, e.c);
      const double b = e.vertical ? v(e.r + 1, e.c) : v(e.r, e.c + 1);
      if (above(a) == above(b)) return std::nullopt;
      const double t = (level - a) / (b - a);
      GridPoint p = e.vertical ? GridPoint{static_cast<double>(e.c), static_cast<double>(e.r) + t}
                               : GridPoint{static_cast<double>(e.c) + t, static_cast<double>(e.r)};
      points.emplace(e, p);
      return e;
    };
    std::vector<std::pair<EdgeId, EdgeId>> segments;
    if (rows == 1 || cols == 1) {
      // Degenerate strip: isolated crossing points.
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          if (c + 1 < cols)
            if (auto e = crossing({false, r, c})) segments.push_back({*e, *e});
          if (r + 1 < rows)
            if (auto e = crossing({true, r, c})) segments.push_back({*e, *e});
        }
      for (const auto& [e, _] : segments) cl.polylines.push_back({points.at(e)});
      out.push_back(std::move(cl));
      continue;
    }
    for (std::size_t r = 0; r + 1 < rows; ++r)
      for (std::size_t c = 0; c + 1 < cols; ++c) {
        auto top = crossing({false, r, c});
        auto bottom = crossing({false, r + 1, c});
        auto left = crossing({true, r, c});
        auto right = crossing({true, r, c + 1});
        std::vector<EdgeId> hits;
        for (auto e : {top, right, bottom, left})
          if (e) hits.push_back(*e);
        if (hits.size() == 2) {
          segments.push_back({hits[0], hits[1]});
        } else if (hits.size() == 4) {
          const double center = 0.25 * (v(r, c) + v(r, c + 1) + v(r + 1, c) + v(r + 1, c + 1));
          if (above(center) == above(v(r, c))) {
            // (r,c) and (r+1,c+1) join through the center; cut off the other two corners.
            segments.push_back({*top, *right});
            segments.push_back({*bottom, *left});
          } else {
            segments.push_back({*left, *top});
            segments.push_back({*right, *bottom});
          }
        }
      }
    cl.polylines = chain(segments, points);
    out.push_back(std::move(cl));
  }
  return out;
}

// --- stars -------------------------------------------------------------------

std::vector<Star> efficiency_stars(std::span<const GridCell> cells,
                                   std::span<const double> thresholds) {
  std::vector<Star> out;
  for (double t : thresholds) {
    Star s{t, std::nullopt};
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      if (!c.ok() || *c.are > t) continue;
      if (!s.cell) {
        s.cell = i;
        continue;
      }
      const auto& b = cells[*s.cell];
      if (std::tie(c.train_flops, *c.are, c.num_models) <
          std::tie(b.train_flops, *b.are, b.num_models))
        s.cell = i;
    }
    out.push_back(s);
  }
  return out;
}

// --- cross-validation ----------------------------------------------------------

std::vector<CvRow> loo_family_cv(const ScaledFamily& family, const FitConfig& config,
                                 const SubsetSpec& spec) {
  config.validate();
  spec.validate();
  const auto sizes = family.sizes();
  if (sizes.size() < 4)
    throw DataError("insufficient families: cross-validation needs at least 4 sizes, found " +
                    std::to_string(sizes.size()));
  const auto top = sizes.back();
  SubsetSpec windows = spec;
  windows.num_models.reset();
  windows.max_train_params.reset();
  std::vector<CvRow> out;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const auto held = sizes[i];
    CvRow row;
    row.held_out_params = held;
    auto heldout = family.filter([&](const CheckpointRecord& r) { return r.num_params == held; });
    for (const auto& run : heldout.runs()) row.model_ids.push_back(run.key.model_id);
    row.model_ids.erase(std::unique(row.model_ids.begin(), row.model_ids.end()),
                        row.model_ids.end());
    auto target = max_token_family(heldout, spec.target_fraction);
    auto train = restrict_train(family.filter([&](const CheckpointRecord& r) {
      return r.num_params != held && r.num_params != top;
    }), windows);
    row.n_train = train.size();
    row.n_target = target.size();
    try {
      row.fit = fit(train, config);
      if (row.fit->converged)
        row.are = are(row.fit->params, target).are;
      else
        row.failure = kFailNoConverge;
    } catch (const Error& e) {
      row.failure = std::string(e.what()).starts_with("insufficient families")
                        ? std::string(kFailInsufficient)
                        : std::string(e.what());
    }
    out.push_back(std::move(row));
  }
  return out;
}

// --- PCA -----------------------------------------------------------------------

PcaReport pca_params(std::span<const LawParams> fits, bool standardize) {
  if (fits.size() < 2)
    throw DataError("PCA needs at least 2 fitted parameter vectors, got " +
                    std::to_string(fits.size()));
  const auto n = static_cast<Eigen::Index>(fits.size());
  Eigen::Matrix<double, Eigen::Dynamic, 5> X(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = fits[static_cast<std::size_t>(i)].to_array();
    for (int k = 0; k < 5; ++k) X(i, k) = a[static_cast<std::size_t>(k)];
  }
  if (!X.allFinite()) throw DataError("PCA input contains non-finite parameters");

  PcaReport rep;
  rep.standardized = standardize;
  const Eigen::Matrix<double, 1, 5> mean = X.colwise().mean();
  Eigen::Matrix<double, Eigen::Dynamic, 5> Z = X.rowwise() - mean;
  Eigen::Matrix<double, 1, 5> scale = Eigen::Matrix<double, 1, 5>::Ones();
  if (standardize) {
    for (int k = 0; k < 5; ++k) {
      const double sd = std::sqrt(Z.col(k).squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) scale[k] = sd;
    }
    Z = Z.array().rowwise() / scale.array();
  }
  const Eigen::Matrix<double, 5, 5> C = (Z.transpose() * Z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> eig(C);
  if (eig.info() != Eigen::Success) throw DataError("eigendecomposition failed");

  double total = 0.0;
  for (int k = 0; k < 5; ++k) total += std::max(0.0, eig.eigenvalues()[k]);
  Eigen::Matrix<double, 5, 5> comps;
  for (int j = 0; j < 5; ++j) {
    const int k = 4 - j;  // ascending -> descending
    Eigen::Matrix<double, 5, 1> vec = eig.eigenvectors().col(k);
    Eigen::Index imax = 0;
    vec.cwiseAbs().maxCoeff(&imax);
    if (vec[imax] < 0) vec = -vec;
    comps.col(j) = vec;
    const double lam = std::max(0.0, eig.eigenvalues()[k]);
    rep.eigenvalues.push_back(lam);
    rep.explained_variance_ratio.push_back(total > 0.0 ? lam / total : 0.0);
    Vec5d c{};
    for (int i = 0; i < 5; ++i) c[static_cast<std::size_t>(i)] = vec[i];
    rep.components.push_back(c);
  }
  const Eigen::Matrix<double, Eigen::Dynamic, 5> S = Z * comps;
  for (int k = 0; k < 5; ++k) {
    rep.mean[static_cast<std::size_t>(k)] = mean[k];
    rep.scale[static_cast<std::size_t>(k)] = scale[k];
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec5d s{};
    for (int k = 0; k < 5; ++k) s[static_cast<std::size_t>(k)] = S(i, k);
    rep.scores.push_back(s);
    rep.a_alpha.emplace_back(X(i, 1), X(i, 2));
    rep.b_beta.emplace_back(X(i, 3), X(i, 4));
  }
  return rep;
}

std::vector<Vec5d> pca_reconstruct(const PcaReport& report) {
  std::vector<Vec5d> out;
  for (const auto& s : report.scores) {
    Vec5d x{};
    for (std::size_t k = 0; k < 5; ++k) {
      double z = 0.0;
      for (std::size_t j = 0; j < report.components.size(); ++j)
        z += s[j] * report.components[j][k];
      x[k] = z * report.scale[k] + report.mean[k];
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace scalaw
