// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "scalaw/checkpoint.hpp"

namespace scalaw {

/// Parameters of  L(N, D) = e^E + e^A / N^alpha + e^B / D^beta.
/// Vector order is fixed: (E, A, alpha, B, beta).
struct LawParams {
  double E = 0.0;
  double A = 0.0;
  double alpha = 0.0;
  double B = 0.0;
  double beta = 0.0;

  static constexpr std::size_t kSize = 5;
  enum Index : std::size_t { kE = 0, kA, kAlpha, kB, kBeta };

  std::array<double, kSize> to_array() const { return {E, A, alpha, B, beta}; }
  static LawParams from_array(const std::array<double, kSize>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
  bool all_finite() const;

  bool operator==(const LawParams&) const = default;
};

/// Evaluated as e^E + exp(A - alpha ln N) + exp(B - beta ln D) so raw counts
/// near 1e11 never overflow an intermediate power. Throws UsageError for
/// N < 1 or D < 1 and NumericError when the result is not finite.
double eval_law(const LawParams& p, double num_params, double tokens);

/// eval_law(p, N_i, D_i) - loss_i over records in canonical order.
std::vector<double> residuals(const LawParams& p, const ScaledFamily& data);

/// Row-major n x 5 Jacobian of the residuals with respect to (E, A, alpha, B,
/// beta).
std::vector<std::array<double, LawParams::kSize>> residual_jacobian(const LawParams& p,
                                                                    const ScaledFamily& data);

inline constexpr double kDefaultHuberDelta = 1e-3;

/// a^2/2 for |a| <= delta, else delta (|a| - delta/2).
double huber(double a, double delta);
/// Derivative of huber with respect to a.
double huber_derivative(double a, double delta);

struct LossKind {
  enum class Kind { kSquare, kHuber };
  Kind kind = Kind::kSquare;
  double delta = kDefaultHuberDelta;

  static LossKind square() { return {}; }
  static LossKind huber(double delta = kDefaultHuberDelta) { return {Kind::kHuber, delta}; }
  bool is_huber() const { return kind == Kind::kHuber; }

  /// rho(r): r^2 for square, huber(r, delta) for Huber.
  double rho(double r) const;
  double rho_derivative(double r) const;

  bool operator==(const LossKind&) const = default;
};

/// Sum of rho(residual_i).
double objective(const LawParams& p, const ScaledFamily& data, const LossKind& loss);
/// Analytic gradient of `objective` with respect to (E, A, alpha, B, beta).
std::array<double, LawParams::kSize> objective_gradient(const LawParams& p,
                                                        const ScaledFamily& data,
                                                        const LossKind& loss);

}  // namespace scalaw
