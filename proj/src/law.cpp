// SPDX-License-Identifier: Apache-2.0
#include "scalaw/law.hpp"

#include <cmath>
#include <string>

#include "scalaw/errors.hpp"

namespace scalaw {

bool LawParams::all_finite() const {
  for (double v : to_array())
    if (!std::isfinite(v)) return false;
  return true;
}

double eval_law(const LawParams& p, double num_params, double tokens) {
  if (!(num_params >= 1.0) || !(tokens >= 1.0))
    throw UsageError("eval_law needs num_params >= 1 and tokens >= 1");
  const double v = std::exp(p.E) + std::exp(p.A - p.alpha * std::log(num_params)) +
                   std::exp(p.B - p.beta * std::log(tokens));
  if (!std::isfinite(v))
    throw NumericError("law evaluation overflowed at N=" + std::to_string(num_params) +
                       ", D=" + std::to_string(tokens));
  return v;
}

std::vector<double> residuals(const LawParams& p, const ScaledFamily& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& r : data.records())
    out.push_back(eval_law(p, static_cast<double>(r.num_params),
                           static_cast<double>(r.tokens_seen)) -
                  r.loss);
  return out;
}

std::vector<std::array<double, LawParams::kSize>> residual_jacobian(const LawParams& p,
                                                                    const ScaledFamily& data) {
  std::vector<std::array<double, LawParams::kSize>> rows;
  rows.reserve(data.size());
  const double eE = std::exp(p.E);
  for (const auto& r : data.records()) {
    const double ln_n = std::log(static_cast<double>(r.num_params));
    const double ln_d = std::log(static_cast<double>(r.tokens_seen));
    const double tn = std::exp(p.A - p.alpha * ln_n);
    const double td = std::exp(p.B - p.beta * ln_d);
    rows.push_back({eE, tn, -ln_n * tn, td, -ln_d * td});
  }
  return rows;
}

double huber(double a, double delta) {
  const double m = std::fabs(a);
  return m <= delta ? 0.5 * a * a : delta * (m - 0.5 * delta);
}

double huber_derivative(double a, double delta) {
  if (std::fabs(a) <= delta) return a;
  return a > 0.0 ? delta : -delta;
}

double LossKind::rho(double r) const { return is_huber() ? scalaw::huber(r, delta) : r * r; }

double LossKind::rho_derivative(double r) const {
  return is_huber() ? huber_derivative(r, delta) : 2.0 * r;
}

double objective(const LawParams& p, const ScaledFamily& data, const LossKind& loss) {
  double f = 0.0;
  for (double r : residuals(p, data)) f += loss.rho(r);
  return f;
}

std::array<double, LawParams::kSize> objective_gradient(const LawParams& p,
                                                        const ScaledFamily& data,
                                                        const LossKind& loss) {
  const auto res = residuals(p, data);
  const auto jac = residual_jacobian(p, data);
  std::array<double, LawParams::kSize> g{};
  for (std::size_t i = 0; i < res.size(); ++i) {
    const double w = loss.rho_derivative(res[i]);
    for (std::size_t k = 0; k < LawParams::kSize; ++k) g[k] += w * jac[i][k];
  }
  return g;
}

}  // namespace scalaw
