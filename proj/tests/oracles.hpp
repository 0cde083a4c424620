// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to freeze expected values.
// Deliberately naive: linear scans, long double sums, no shared helpers
// from the library beyond the record types.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "scalaw/checkpoint.hpp"
#include "scalaw/law.hpp"

namespace oracle {

using scalaw::CheckpointRecord;
using scalaw::LawParams;
using scalaw::ScaledFamily;
using Rational = boost::multiprecision::cpp_rational;

/// Exact value of q * m.
inline Rational scaled(double q, std::int64_t m) { return Rational(q) * Rational(m); }

inline std::vector<CheckpointRecord> recs(const ScaledFamily& f) {
  return {f.records().begin(), f.records().end()};
}

inline long double law(const LawParams& p, long double n, long double d) {
  return std::exp((long double)p.E) + std::exp((long double)p.A) / std::pow(n, (long double)p.alpha) +
         std::exp((long double)p.B) / std::pow(d, (long double)p.beta);
}

inline std::int64_t max_params(const std::vector<CheckpointRecord>& rs) {
  std::int64_t m = 0;
  for (const auto& r : rs) m = std::max(m, r.num_params);
  return m;
}

inline std::vector<CheckpointRecord> max_param_family(const std::vector<CheckpointRecord>& rs) {
  std::vector<CheckpointRecord> out;
  const auto m = max_params(rs);
  for (const auto& r : rs)
    if (r.num_params == m) out.push_back(r);
  return out;
}

inline std::vector<CheckpointRecord> max_token_family(const std::vector<CheckpointRecord>& rs,
                                                      double q) {
  std::int64_t m = 0;
  for (const auto& r : rs) m = std::max(m, r.tokens_seen);
  std::vector<CheckpointRecord> out;
  for (const auto& r : rs)
    if (Rational(r.tokens_seen) >= scaled(q, m)) out.push_back(r);
  return out;
}

inline std::vector<CheckpointRecord> prefix_window(const std::vector<CheckpointRecord>& rs,
                                                   double q) {
  std::vector<CheckpointRecord> out;
  for (const auto& r : rs)
    if (Rational(r.tokens_seen) <= scaled(q, r.total_tokens)) out.push_back(r);
  return out;
}

inline std::vector<CheckpointRecord> suffix_window(const std::vector<CheckpointRecord>& rs,
                                                   double q) {
  std::vector<CheckpointRecord> out;
  for (const auto& r : rs)
    if (Rational(r.tokens_seen) >= scaled(1.0 - q, r.total_tokens)) out.push_back(r);
  return out;
}

inline std::vector<CheckpointRecord> cutoff(const std::vector<CheckpointRecord>& rs,
                                            std::int64_t c) {
  std::vector<CheckpointRecord> out;
  for (const auto& r : rs)
    if (r.tokens_seen >= c) out.push_back(r);
  return out;
}

inline std::vector<CheckpointRecord> k_smallest_sizes(const std::vector<CheckpointRecord>& rs,
                                                      std::size_t k) {
  std::set<std::int64_t> sizes;
  for (const auto& r : rs) sizes.insert(r.num_params);
  std::set<std::int64_t> keep;
  for (auto s : sizes) {
    if (keep.size() == k) break;
    keep.insert(s);
  }
  std::vector<CheckpointRecord> out;
  for (const auto& r : rs)
    if (keep.count(r.num_params)) out.push_back(r);
  return out;
}

inline std::size_t distinct_sizes(const std::vector<CheckpointRecord>& rs) {
  std::set<std::int64_t> s;
  for (const auto& r : rs) s.insert(r.num_params);
  return s.size();
}

inline double are(const LawParams& p, const std::vector<CheckpointRecord>& targets) {
  long double sum = 0;
  for (const auto& r : targets) {
    const long double pred = law(p, (long double)r.num_params, (long double)r.tokens_seen);
    sum += std::fabs(pred - (long double)r.loss) / (long double)r.loss;
  }
  return (double)(sum / (long double)targets.size());
}

/// Mean |c - y| / y accumulated in double over `targets` in the given order.
inline double constant_are(double c, const std::vector<CheckpointRecord>& targets) {
  double sum = 0;
  for (const auto& r : targets) sum += std::fabs((c - r.loss) / r.loss);
  return sum / static_cast<double>(targets.size());
}

inline double best_performance(const std::vector<CheckpointRecord>& train) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : train) m = std::min(m, r.loss);
  return m;
}

/// Loss of the record with the largest num_params * tokens_seen; ties to the
/// lower loss.
inline double most_trained(const std::vector<CheckpointRecord>& train) {
  __int128 best = -1;
  double loss = 0;
  for (const auto& r : train) {
    const __int128 c = (__int128)r.num_params * (__int128)r.tokens_seen;
    if (c > best || (c == best && r.loss < loss)) {
      best = c;
      loss = r.loss;
    }
  }
  return loss;
}

/// Per run (model_id, seed): 6 * N * max tokens_seen, or that checkpoint's
/// flops field when set. Summed in double in (model_id, seed) order.
inline double train_flops(const std::vector<CheckpointRecord>& rs) {
  std::map<std::pair<std::string, std::int64_t>, const CheckpointRecord*> last;
  for (const auto& r : rs) {
    auto key = std::make_pair(r.model_id, r.seed.value_or(0));
    auto it = last.find(key);
    if (it == last.end() || r.tokens_seen > it->second->tokens_seen) last[key] = &r;
  }
  double sum = 0;
  for (const auto& [k, r] : last)
    sum += r->flops ? *r->flops : 6.0 * (double)r->num_params * (double)r->tokens_seen;
  return sum;
}

struct StarCell {
  std::optional<double> are;
  double flops = 0;
  std::size_t models = 0;
};

inline std::optional<std::size_t> star(const std::vector<StarCell>& cells, double t) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!cells[i].are || *cells[i].are > t) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = cells[*best];
    const auto& c = cells[i];
    if (c.flops < b.flops || (c.flops == b.flops && *c.are < *b.are) ||
        (c.flops == b.flops && *c.are == *b.are && c.models < b.models))
      best = i;
  }
  return best;
}

/// Random well-formed family: a few sizes, one or two seeds, log-ish token
/// schedules, losses drawn from a law plus noise.
inline ScaledFamily random_family(std::mt19937_64& rng, int min_sizes = 3, int max_sizes = 7) {
  std::uniform_int_distribution<int> nsizes(min_sizes, max_sizes);
  std::uniform_int_distribution<int> nckpt(2, 12);
  std::uniform_int_distribution<int> nseeds(1, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int k = nsizes(rng);
  std::set<std::int64_t> sizes;
  while ((int)sizes.size() < k) sizes.insert((std::int64_t)std::pow(10.0, 6.0 + 3.0 * u(rng)));
  const LawParams p{std::log(1.5 + u(rng)), std::log(300.0 + 200 * u(rng)), 0.2 + 0.3 * u(rng),
                    std::log(300.0 + 200 * u(rng)), 0.2 + 0.3 * u(rng)};
  std::vector<CheckpointRecord> out;
  for (auto n : sizes) {
    const int seeds = nseeds(rng);
    const auto total = (std::int64_t)std::pow(10.0, 8.0 + 3.0 * u(rng));
    for (int s = 0; s < seeds; ++s) {
      const int c = nckpt(rng);
      std::set<std::int64_t> toks{total};
      // Window edges sit exactly on common fractions of the run.
      if (u(rng) < 0.5) toks.insert({total * 3 / 10, total / 2, total * 7 / 10});
      while ((int)toks.size() < c) toks.insert(1 + (std::int64_t)(u(rng) * (double)total));
      for (auto t : toks) {
        CheckpointRecord r;
        r.family_id = "rand";
        r.model_id = "m" + std::to_string(n);
        r.num_params = n;
        r.tokens_seen = t;
        r.total_tokens = total;
        if (seeds > 1) r.seed = s;
        r.loss = (double)law(p, (long double)n, (long double)t) * (1.0 + 0.01 * (u(rng) - 0.5));
        if (u(rng) < 0.1) r.flops = std::floor(6.5 * (double)n * (double)t);
        out.push_back(r);
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return ScaledFamily("rand", out);
}

/// Central differences of f along each parameter.
template <class F>
std::array<double, 5> numeric_gradient(F&& f, const LawParams& p, double h = 1e-6) {
  std::array<double, 5> g{};
  auto a = p.to_array();
  for (std::size_t i = 0; i < 5; ++i) {
    auto up = a, dn = a;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(LawParams::from_array(up)) - f(LawParams::from_array(dn))) / (2 * h);
  }
  return g;
}

}  // namespace oracle
