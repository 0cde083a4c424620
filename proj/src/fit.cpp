// SPDX-License-Identifier: Apache-2.0
#include "scalaw/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "scalaw/errors.hpp"

namespace scalaw {

void FitConfig::validate() const {
  if (loss.is_huber() && !(loss.delta > 0.0)) throw UsageError("huber delta must be positive");
  if (restarts < 1) throw UsageError("restarts must be >= 1");
  if (max_iterations < 1) throw UsageError("max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw UsageError("tolerance must be positive");
  if (frozen.A && !std::isfinite(*frozen.A)) throw UsageError("frozen A must be finite");
  if (frozen.alpha && !std::isfinite(*frozen.alpha))
    throw UsageError("frozen alpha must be finite");
}

namespace {

constexpr std::size_t kP = LawParams::kSize;
using Vec5 = Eigen::Matrix<double, 5, 1>;

// The solver works in centered coordinates: log counts are shifted by their
// geometric means and A, B absorb the shift, which keeps the Jacobian columns
// of comparable magnitude for raw counts around 1e9..1e12.
class Problem {
 public:
  Problem(const ScaledFamily& data, const FitConfig& config) : loss_(config.loss) {
    for (const auto& r : data.records()) {
      ln_n_.push_back(std::log(static_cast<double>(r.num_params)));
      ln_d_.push_back(std::log(static_cast<double>(r.tokens_seen)));
      y_.push_back(r.loss);
    }
    const double n = static_cast<double>(y_.size());
    // Centering N couples A to alpha, which is only allowed if both move or
    // both stay.
    if (config.frozen.A.has_value() == config.frozen.alpha.has_value())
      n0_ = std::accumulate(ln_n_.begin(), ln_n_.end(), 0.0) / n;
    d0_ = std::accumulate(ln_d_.begin(), ln_d_.end(), 0.0) / n;
    free_ = {true, !config.frozen.A, !config.frozen.alpha, true, true};
    for (std::size_t k = 0; k < kP; ++k)
      if (free_[k]) free_idx_.push_back(k);
    double ymax = 0.0;
    for (double v : y_) ymax = std::max(ymax, std::fabs(v));
    const double eps = std::numeric_limits<double>::epsilon();
    const double per_point = 16.0 * eps * ymax;
    floor_ = n * per_point * per_point * (loss_.is_huber() ? 0.5 : 1.0);
  }

  std::size_t n() const { return y_.size(); }
  const std::vector<std::size_t>& free_idx() const { return free_idx_; }
  const std::vector<double>& ln_n() const { return ln_n_; }
  const std::vector<double>& ln_d() const { return ln_d_; }
  const std::vector<double>& y() const { return y_; }
  double n0() const { return n0_; }
  double d0() const { return d0_; }
  double floor() const { return floor_; }
  const LossKind& loss() const { return loss_; }

  Vec5 to_internal(const LawParams& p) const {
    Vec5 x;
    x << p.E, p.A - p.alpha * n0_, p.alpha, p.B - p.beta * d0_, p.beta;
    return x;
  }
  LawParams to_params(const Vec5& x) const {
    return {x[0], x[1] + x[2] * n0_, x[2], x[3] + x[4] * d0_, x[4]};
  }

  // Residuals; false when any prediction is not finite.
  bool residuals(const Vec5& x, Eigen::VectorXd& r) const {
    r.resize(static_cast<Eigen::Index>(n()));
    const double eE = std::exp(x[0]);
    for (std::size_t i = 0; i < n(); ++i) {
      const double pred = eE + std::exp(x[1] - x[2] * (ln_n_[i] - n0_)) +
                          std::exp(x[3] - x[4] * (ln_d_[i] - d0_));
      if (!std::isfinite(pred)) return false;
      r[static_cast<Eigen::Index>(i)] = pred - y_[i];
    }
    return true;
  }

  double objective(const Eigen::VectorXd& r) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) f += loss_.rho(r[i]);
    return f;
  }

  // Jacobian restricted to free coordinates.
  Eigen::MatrixXd jacobian(const Vec5& x) const {
    Eigen::MatrixXd full(static_cast<Eigen::Index>(n()), 5);
    const double eE = std::exp(x[0]);
    for (std::size_t i = 0; i < n(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      const double un = ln_n_[i] - n0_;
      const double ud = ln_d_[i] - d0_;
      const double tn = std::exp(x[1] - x[2] * un);
      const double td = std::exp(x[3] - x[4] * ud);
      full(row, 0) = eE;
      full(row, 1) = tn;
      full(row, 2) = -un * tn;
      full(row, 3) = td;
      full(row, 4) = -ud * td;
    }
    Eigen::MatrixXd J(full.rows(), static_cast<Eigen::Index>(free_idx_.size()));
    for (std::size_t c = 0; c < free_idx_.size(); ++c)
      J.col(static_cast<Eigen::Index>(c)) = full.col(static_cast<Eigen::Index>(free_idx_[c]));
    return J;
  }

 private:
  LossKind loss_;
  std::vector<double> ln_n_, ln_d_, y_;
  double n0_ = 0.0;
  double d0_ = 0.0;
  double floor_ = 0.0;
  std::array<bool, kP> free_{};
  std::vector<std::size_t> free_idx_;
};

// IRLS weight rho'(r)/r; the Gauss-Newton model of rho around r.
double irls_weight(const LossKind& loss, double r) {
  if (!loss.is_huber()) return 2.0;
  const double m = std::fabs(r);
  return m <= loss.delta ? 1.0 : loss.delta / m;
}

bool degenerate(const LawParams& p) {
  return !p.all_finite() || p.alpha < kMinExponent || p.alpha > kMaxExponent ||
         p.beta < kMinExponent || p.beta > kMaxExponent;
}

LocalFit solve(const Problem& prob, const LawParams& start, const FitConfig& config) {
  Vec5 x = prob.to_internal(start);
  Eigen::VectorXd r;
  LocalFit out;
  out.params = start;
  if (!prob.residuals(x, r)) {
    out.objective = std::numeric_limits<double>::infinity();
    return out;
  }
  double f = prob.objective(r);
  const auto& idx = prob.free_idx();
  const auto m = static_cast<Eigen::Index>(idx.size());

  double lambda = 1e-3;
  double nu = 2.0;
  bool converged = f <= prob.floor();
  int iter = 0;
  for (; iter < config.max_iterations && !converged; ++iter) {
    const Eigen::MatrixXd J = prob.jacobian(x);
    Eigen::VectorXd w(r.size());
    Eigen::VectorXd dr(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      w[i] = irls_weight(prob.loss(), r[i]);
      dr[i] = prob.loss().rho_derivative(r[i]);
    }
    const Eigen::VectorXd g = J.transpose() * dr;
    const Eigen::MatrixXd H = J.transpose() * w.asDiagonal() * J;
    Eigen::VectorXd scale = H.diagonal();
    const double max_diag = scale.maxCoeff();
    for (Eigen::Index k = 0; k < m; ++k)
      scale[k] = std::max(scale[k], std::max(1e-12 * max_diag, 1e-300));

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * scale;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
      Eigen::VectorXd h = ldlt.solve(-g);
      bool ok = ldlt.info() == Eigen::Success && h.allFinite();
      Vec5 x_new = x;
      for (Eigen::Index k = 0; k < m; ++k) x_new[static_cast<Eigen::Index>(idx[static_cast<std::size_t>(k)])] += ok ? h[k] : 0.0;
      Eigen::VectorXd r_new;
      double f_new = std::numeric_limits<double>::infinity();
      if (ok && prob.residuals(x_new, r_new)) f_new = prob.objective(r_new);
      const double actual = f - f_new;
      if (ok && actual > 0.0) {
        const double predicted = -(g.dot(h) + 0.5 * h.dot(H * h));
        const double gain = predicted > 0.0 ? actual / predicted : 0.0;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3));
        nu = 2.0;
        const double step = h.norm();
        const double size = x_new.norm();
        if ((actual <= config.tolerance * f && std::fabs(predicted) <= config.tolerance * f) ||
            step <= 1e-15 * (size + 1e-15))
          converged = true;
        x = x_new;
        r = std::move(r_new);
        f = f_new;
        if (f <= prob.floor()) converged = true;
        accepted = true;
      } else {
        lambda *= nu;
        nu *= 2.0;
        // No direction decreases the objective at working precision.
        if (lambda > 1e16) {
          converged = true;
          break;
        }
      }
    }
  }
  out.params = prob.to_params(x);
  out.objective = f;
  out.iterations = iter;
  out.converged = converged && !degenerate(out.params);
  return out;
}

// A and B from two anchor points at fixed (E, alpha, beta): the record with
// the smallest N (most tokens) and the one with the largest N (fewest
// tokens), which keeps the 2x2 system away from singular.
void solve_amplitudes(const Problem& prob, const FitConfig& config, Vec5& x) {
  const auto& ln_n = prob.ln_n();
  const auto& ln_d = prob.ln_d();
  const auto& y = prob.y();
  const std::size_t n = y.size();
  const double eE = std::exp(x[0]);
  double ymean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  auto fallback_log_amp = [&](double exponent, const std::vector<double>& ln, double center) {
    double umean = 0.0;
    for (double v : ln) umean += v - center;
    umean /= static_cast<double>(n);
    const double excess = std::max(ymean - eE, 0.05 * ymean);
    return std::log(0.5 * excess) + exponent * umean;
  };

  const bool a_free = !config.frozen.A.has_value();
  if (!a_free) {
    // B from the median-token point; the A term is known.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end(),
                     [&](std::size_t a, std::size_t b) { return ln_d[a] < ln_d[b]; });
    const std::size_t i = order[n / 2];
    const double tn = std::exp(x[1] - x[2] * (ln_n[i] - prob.n0()));
    const double rest = y[i] - eE - tn;
    const double basis = std::exp(-x[4] * (ln_d[i] - prob.d0()));
    x[3] = rest > 0.0 ? std::log(rest / basis) : fallback_log_amp(x[4], ln_d, prob.d0());
    return;
  }

  std::size_t p1 = 0, p2 = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (ln_n[i] < ln_n[p1] || (ln_n[i] == ln_n[p1] && ln_d[i] > ln_d[p1])) p1 = i;
    if (ln_n[i] > ln_n[p2] || (ln_n[i] == ln_n[p2] && ln_d[i] < ln_d[p2])) p2 = i;
  }
  Eigen::Matrix2d M;
  Eigen::Vector2d rhs;
  for (int row = 0; row < 2; ++row) {
    const std::size_t i = row == 0 ? p1 : p2;
    M(row, 0) = std::exp(-x[2] * (ln_n[i] - prob.n0()));
    M(row, 1) = std::exp(-x[4] * (ln_d[i] - prob.d0()));
    rhs[row] = y[i] - eE;
  }
  Eigen::Vector2d ab = Eigen::Vector2d::Constant(-1.0);
  if (p1 != p2 && std::fabs(M.determinant()) > 1e-12 * M.cwiseAbs().maxCoeff() *
                                                   M.cwiseAbs().maxCoeff())
    ab = M.fullPivLu().solve(rhs);
  x[1] = ab[0] > 0.0 && std::isfinite(ab[0]) ? std::log(ab[0])
                                             : fallback_log_amp(x[2], ln_n, prob.n0());
  x[3] = ab[1] > 0.0 && std::isfinite(ab[1]) ? std::log(ab[1])
                                             : fallback_log_amp(x[4], ln_d, prob.d0());
}

std::vector<Vec5> internal_starts(const Problem& prob, const FitConfig& config) {
  static constexpr double kExps[] = {0.2, 0.35, 0.5, 0.8};
  const double kEs[] = {std::log(1.5), std::log(2.5)};

  auto make = [&](double E, double alpha, double beta) {
    Vec5 x;
    x << E, 0.0, config.frozen.alpha.value_or(alpha), 0.0, beta;
    if (config.frozen.A) x[1] = *config.frozen.A - x[2] * prob.n0();
    solve_amplitudes(prob, config, x);
    return x;
  };

  std::vector<Vec5> grid;
  for (double E : kEs)
    for (double a : kExps)
      for (double b : kExps) {
        Vec5 x = make(E, a, b);
        bool dup = std::any_of(grid.begin(), grid.end(), [&](const Vec5& y) { return y == x; });
        if (!dup) grid.push_back(x);
      }

  const auto total = static_cast<std::size_t>(config.restarts);
  std::vector<Vec5> starts(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(
                                                           std::min(total, grid.size())));
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = starts.size(); j < total; ++j) {
    const Vec5& base = grid[j % grid.size()];
    const double E = base[0] + 0.25 * normal(rng);
    const double a = base[2] * std::exp(0.3 * normal(rng));
    const double b = base[4] * std::exp(0.3 * normal(rng));
    starts.push_back(make(E, a, b));
  }
  return starts;
}

void check_preconditions(const ScaledFamily& data, const FitConfig& config) {
  require_single_corpus(data);
  const std::size_t n = data.size();
  const std::size_t sizes = data.num_sizes();
  const bool a_free = !config.frozen.A, alpha_free = !config.frozen.alpha;
  if (a_free && alpha_free) {
    if (sizes < 3)
      throw DataError("insufficient families: " + std::to_string(sizes) +
                      " distinct sizes, need at least 3");
    if (n < 5)
      throw DataError("insufficient data: " + std::to_string(n) + " points, need at least 5");
  } else if (a_free || alpha_free) {
    if (sizes < 2)
      throw DataError("insufficient families: a free size parameter needs 2 distinct sizes");
    if (n < 4)
      throw DataError("insufficient data: " + std::to_string(n) + " points, need at least 4");
  } else if (n < 2) {
    throw DataError("insufficient data: " + std::to_string(n) + " points, need at least 2");
  }
}

// Objectives within this band are treated as equal.
bool same_objective(double a, double b, double floor) {
  if (a <= floor && b <= floor) return true;
  return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b));
}

}  // namespace

std::vector<LawParams> initial_starts(const ScaledFamily& data, const FitConfig& config) {
  config.validate();
  check_preconditions(data, config);
  Problem prob(data, config);
  std::vector<LawParams> out;
  for (const auto& x : internal_starts(prob, config)) out.push_back(prob.to_params(x));
  return out;
}

LocalFit local_fit(const ScaledFamily& data, const LawParams& start, const FitConfig& config) {
  config.validate();
  check_preconditions(data, config);
  Problem prob(data, config);
  LawParams s = start;
  if (config.frozen.A) s.A = *config.frozen.A;
  if (config.frozen.alpha) s.alpha = *config.frozen.alpha;
  return solve(prob, s, config);
}

FitResult fit(const ScaledFamily& data, const FitConfig& config) {
  config.validate();
  check_preconditions(data, config);
  Problem prob(data, config);
  const auto starts = internal_starts(prob, config);

  FitResult best;
  best.n_points = static_cast<int>(data.size());
  best.restarts_tried = static_cast<int>(starts.size());
  best.objective = std::numeric_limits<double>::infinity();
  bool have = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    LocalFit local = solve(prob, prob.to_params(starts[i]), config);
    if (config.frozen.A) local.params.A = *config.frozen.A;
    if (config.frozen.alpha) local.params.alpha = *config.frozen.alpha;
    bool better = false;
    if (!have) {
      better = true;
    } else if (local.converged != best.converged) {
      better = local.converged;
    } else if (!same_objective(local.objective, best.objective, prob.floor())) {
      better = local.objective < best.objective;
    } else {
      better = local.params.alpha + local.params.beta < best.params.alpha + best.params.beta;
    }
    if (better) {
      have = true;
      best.params = local.params;
      best.objective = local.objective;
      best.converged = local.converged;
      best.iterations = local.iterations;
      best.best_start = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace scalaw
