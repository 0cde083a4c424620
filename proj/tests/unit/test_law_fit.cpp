// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/fit.hpp"
#include "scalaw/law.hpp"
#include "scalaw/synth.hpp"

using namespace scalaw;

namespace {

const LawParams kTruth{std::log(1.69), std::log(406.4), 0.34, std::log(410.7), 0.28};

ScaledFamily synthetic(double noise = 0.0, std::uint64_t seed = 0, int sizes = 5) {
  SynthSpec s;
  s.truth = kTruth;
  s.sizes = log_spaced_sizes(1e7, 1e9, sizes);
  s.tokens_per_run = {2'000'000'000};
  s.checkpoints_per_run = 15;
  s.noise_sigma = noise;
  s.rng_seed = seed;
  return generate(s);
}

}  // namespace

TEST_SUITE("law") {
  TEST_CASE("frozen evaluations") {
    CHECK(eval_law({0.0, 0.0, 1.0, 0.0, 1.0}, 10, 100) == doctest::Approx(1.11).epsilon(1e-15));
    CHECK(eval_law(kTruth, 1e9, 2e10) ==
          doctest::Approx((double)oracle::law(kTruth, 1e9L, 2e10L)).epsilon(1e-14));
    CHECK(huber(0.1, 1e-3) == doctest::Approx(9.95e-5).epsilon(1e-14));
    CHECK(huber(5e-4, 1e-3) == doctest::Approx(1.25e-7).epsilon(1e-14));
    CHECK(huber(-0.1, 1e-3) == huber(0.1, 1e-3));
  }

  TEST_CASE("domain errors") {
    CHECK_THROWS_AS(eval_law(kTruth, 0.5, 10), UsageError);
    CHECK_THROWS_AS(eval_law(kTruth, 10, 0), UsageError);
    CHECK_THROWS_AS(eval_law({800.0, 0, 0, 0, 0}, 10, 10), NumericError);
  }

  TEST_CASE("no overflow at raw counts") {
    CHECK(std::isfinite(eval_law(kTruth, 1e12, 1e13)));
    CHECK(std::isfinite(eval_law({0, 50, 3.0, 50, 3.0}, 1e11, 1e11)));
  }

  TEST_CASE("huber derivative matches finite differences") {
    for (double a : {-0.5, -2e-3, -5e-4, 1e-5, 7e-4, 3e-3, 1.0}) {
      const double h = 1e-9;
      const double fd = (huber(a + h, 1e-3) - huber(a - h, 1e-3)) / (2 * h);
      CHECK(huber_derivative(a, 1e-3) == doctest::Approx(fd).epsilon(1e-5));
    }
  }

  TEST_CASE("objective gradient matches finite differences") {
    const auto data = synthetic(0.02, 4);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto loss : {LossKind::square(), LossKind::huber(1e-3), LossKind::huber(0.5)}) {
      for (int i = 0; i < 10; ++i) {
        auto a = kTruth.to_array();
        for (auto& v : a) v += u(rng);
        const auto p = LawParams::from_array(a);
        const auto g = objective_gradient(p, data, loss);
        const auto fd =
            oracle::numeric_gradient([&](const LawParams& q) { return objective(q, data, loss); }, p);
        for (int k = 0; k < 5; ++k)
          CHECK(g[k] == doctest::Approx(fd[k]).epsilon(1e-5).scale(1e-6));
      }
    }
  }

  TEST_CASE("residual jacobian matches finite differences") {
    const auto data = synthetic(0.0, 0, 3);
    const auto J = residual_jacobian(kTruth, data);
    for (int k = 0; k < 5; ++k) {
      auto up = kTruth.to_array(), dn = up;
      up[k] += 1e-6;
      dn[k] -= 1e-6;
      const auto ru = residuals(LawParams::from_array(up), data);
      const auto rd = residuals(LawParams::from_array(dn), data);
      for (std::size_t i = 0; i < J.size(); ++i)
        CHECK(J[i][k] == doctest::Approx((ru[i] - rd[i]) / 2e-6).epsilon(1e-6).scale(1e-6));
    }
  }
}

TEST_SUITE("fit") {
  TEST_CASE("recovers noiseless truth") {
    const auto r = fit(synthetic());
    CHECK(r.converged);
    CHECK(r.params.alpha == doctest::Approx(kTruth.alpha).epsilon(1e-6));
    CHECK(r.params.beta == doctest::Approx(kTruth.beta).epsilon(1e-6));
    CHECK(r.params.E == doctest::Approx(kTruth.E).epsilon(1e-6));
  }

  TEST_CASE("huber fit recovers noiseless truth") {
    FitConfig c;
    c.loss = LossKind::huber();
    const auto r = fit(synthetic(), c);
    CHECK(r.converged);
    CHECK(r.params.alpha == doctest::Approx(kTruth.alpha).epsilon(1e-5));
    CHECK(r.params.beta == doctest::Approx(kTruth.beta).epsilon(1e-5));
  }

  TEST_CASE("deterministic for a fixed seed") {
    const auto data = synthetic(0.02, 9);
    FitConfig c;
    c.rng_seed = 42;
    const auto a = fit(data, c);
    const auto b = fit(data, c);
    CHECK(a.params == b.params);
    CHECK(a.objective == b.objective);
    CHECK(a.best_start == b.best_start);
  }

  TEST_CASE("more restarts never worsen the objective") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto data = synthetic(0.03, seed);
      double prev = INFINITY;
      for (int n : {8, 16, 32, 64}) {
        FitConfig c;
        c.restarts = n;
        c.rng_seed = seed;
        const auto r = fit(data, c);
        CHECK(r.objective <= prev * (1 + 1e-9));
        prev = r.objective;
      }
    }
  }

  TEST_CASE("rescaling N shifts A by alpha ln k and leaves exponents") {
    const auto data = synthetic(0.01, 3);
    auto rs = oracle::recs(data);
    for (auto& r : rs) r.num_params *= 1000;
    const auto a = fit(data);
    const auto b = fit(ScaledFamily(data.family_id(), rs));
    CHECK(b.params.alpha == doctest::Approx(a.params.alpha).epsilon(1e-4));
    CHECK(b.params.beta == doctest::Approx(a.params.beta).epsilon(1e-4));
    CHECK(b.params.A == doctest::Approx(a.params.A + a.params.alpha * std::log(1000.0)).epsilon(1e-4));
  }

  TEST_CASE("frozen parameters are kept exactly") {
    SynthSpec s;
    s.truth = kTruth;
    s.sizes = {100'000'000};
    s.tokens_per_run = {2'000'000'000};
    const auto data = generate(s);
    FitConfig c;
    c.frozen.A = kTruth.A;
    c.frozen.alpha = kTruth.alpha;
    const auto r = fit(data, c);
    CHECK(r.converged);
    CHECK(r.params.A == kTruth.A);
    CHECK(r.params.alpha == kTruth.alpha);
    CHECK(r.params.beta == doctest::Approx(kTruth.beta).epsilon(1e-6));
  }

  TEST_CASE("underdetermined data is rejected") {
    SynthSpec s;
    s.truth = kTruth;
    s.sizes = {10'000'000, 20'000'000};
    s.tokens_per_run = {2'000'000'000};
    CHECK_THROWS_AS(fit(generate(s)), DataError);
  }

  TEST_CASE("mixed corpora are rejected") {
    auto rs = oracle::recs(synthetic());
    auto more = rs;
    for (auto& r : more) r.loss_corpus = "code";
    rs.insert(rs.end(), more.begin(), more.end());
    CHECK_THROWS_AS(fit(ScaledFamily("synthetic", rs)), DataError);
  }

  TEST_CASE("config validation") {
    FitConfig c;
    c.restarts = 0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = {};
    c.loss = LossKind::huber(-1.0);
    CHECK_THROWS_AS(c.validate(), UsageError);
  }

  TEST_CASE("first starts do not depend on the restart budget") {
    const auto data = synthetic();
    FitConfig a, b;
    a.restarts = 8;
    b.restarts = 40;
    const auto sa = initial_starts(data, a);
    const auto sb = initial_starts(data, b);
    REQUIRE(sa.size() == 8);
    REQUIRE(sb.size() == 40);
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);
  }
}
