// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/synth.hpp"

using namespace scalaw;

namespace {

SynthSpec base() {
  SynthSpec s;
  s.truth = {std::log(1.69), std::log(406.4), 0.34, std::log(410.7), 0.28};
  s.sizes = log_spaced_sizes(1e7, 1e9, 4);
  s.tokens_per_run = {2'000'000'000};
  s.checkpoints_per_run = 10;
  return s;
}

}  // namespace

TEST_SUITE("synth") {
  TEST_CASE("noiseless losses equal the law") {
    const auto fam = generate(base());
    CHECK(fam.size() == 40);
    for (const auto& r : fam.records())
      CHECK(r.loss == doctest::Approx((double)oracle::law(base().truth, r.num_params, r.tokens_seen))
                          .epsilon(1e-14));
  }

  TEST_CASE("schedule") {
    const auto s = checkpoint_schedule(1'000'000, 5, 0.01);
    REQUIRE(s.size() == 5);
    CHECK(s.front() == 10'000);
    CHECK(s.back() == 1'000'000);
    CHECK(s[2] == 100'000);
    CHECK(log_spaced_sizes(1e7, 1e9, 3) == std::vector<std::int64_t>{10'000'000, 100'000'000,
                                                                      1'000'000'000});
  }

  TEST_CASE("deterministic per seed") {
    auto s = base();
    s.noise_sigma = 0.02;
    s.rng_seed = 9;
    CHECK(generate(s) == generate(s));
    auto t = s;
    t.rng_seed = 10;
    CHECK_FALSE(generate(s) == generate(t));
  }

  TEST_CASE("bump does not change records past its span") {
    auto s = base();
    s.noise_sigma = 0.02;
    s.rng_seed = 4;
    auto b = s;
    b.warmup_bump = WarmupBump{0.5, 200'000'000};
    const auto plain = generate(s);
    const auto bumped = generate(b);
    REQUIRE(plain.size() == bumped.size());
    for (std::size_t i = 0; i < plain.size(); ++i) {
      const auto& p = plain.records()[i];
      const auto& q = bumped.records()[i];
      if (p.tokens_seen >= 200'000'000)
        CHECK(p.loss == q.loss);
      else
        CHECK(q.loss > p.loss);
    }
  }

  TEST_CASE("seeded runs") {
    auto s = base();
    s.runs_per_size = 3;
    s.seed_sigma = 0.01;
    const auto fam = generate(s);
    CHECK(fam.runs().size() == 12);
    CHECK(fam.num_sizes() == 4);
  }

  TEST_CASE("validation") {
    auto s = base();
    s.sizes = {};
    CHECK_THROWS_AS(generate(s), UsageError);
    s = base();
    s.tokens_per_run = {1, 2};
    CHECK_THROWS_AS(generate(s), UsageError);
    s = base();
    s.noise_sigma = -1;
    CHECK_THROWS_AS(generate(s), UsageError);
  }
}
