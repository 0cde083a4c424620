// SPDX-License-Identifier: Apache-2.0
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/subset.hpp"

using namespace scalaw;

namespace {

std::vector<CheckpointRecord> sorted(std::vector<CheckpointRecord> v) {
  std::sort(v.begin(), v.end(), canonical_less);
  return v;
}

}  // namespace

TEST_SUITE("subset") {
  TEST_CASE("max-param and max-token families match brute force") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 50; ++i) {
      const auto fam = oracle::random_family(rng);
      const auto all = oracle::recs(fam);
      CHECK(oracle::recs(max_param_family(fam)) == sorted(oracle::max_param_family(all)));
      for (double q : {0.1, 0.3, 0.77, 1.0})
        CHECK(oracle::recs(max_token_family(fam, q)) == sorted(oracle::max_token_family(all, q)));
    }
  }

  TEST_CASE("train and target partition the family without overlap") {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 50; ++i) {
      const auto fam = oracle::random_family(rng, 4, 7);
      const auto split = select_train_target(fam);
      const auto all = oracle::recs(fam);
      const auto top = oracle::max_params(all);
      CHECK(oracle::recs(split.target) ==
            sorted(oracle::max_token_family(oracle::max_param_family(all), 0.3)));
      for (const auto& r : split.train.records()) CHECK(r.num_params < top);
      CHECK(split.train.size() + oracle::max_param_family(all).size() == all.size());
    }
  }

  TEST_CASE("training windows match brute force") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 50; ++i) {
      const auto fam = oracle::random_family(rng, 5, 7);
      const auto all = oracle::recs(fam);
      std::vector<CheckpointRecord> pool;
      for (const auto& r : all)
        if (r.num_params < oracle::max_params(all)) pool.push_back(r);
      SubsetSpec s;
      s.num_models = 3;
      s.train_fraction_max = 0.5;
      s.cutoff_tokens = 1'000'000;
      const auto got = oracle::recs(build_train_target(fam, s).train);
      const auto want =
          oracle::cutoff(oracle::prefix_window(oracle::k_smallest_sizes(pool, 3), 0.5), 1'000'000);
      CHECK(got == sorted(want));
    }
  }

  TEST_CASE("more data never shrinks the training set") {
    std::mt19937_64 rng(14);
    for (int i = 0; i < 30; ++i) {
      const auto fam = oracle::random_family(rng, 5, 7);
      std::size_t prev = 0;
      for (double q : {0.1, 0.2, 0.4, 0.8, 1.0}) {
        SubsetSpec s;
        s.train_fraction_max = q;
        const auto n = build_train_target(fam, s).train.size();
        CHECK(n >= prev);
        prev = n;
      }
      prev = 0;
      for (int k = 1; k <= 4; ++k) {
        SubsetSpec s;
        s.num_models = k;
        const auto n = build_train_target(fam, s).train.size();
        CHECK(n >= prev);
        prev = n;
      }
    }
  }

  TEST_CASE("fewer than three training sizes is rejected") {
    std::mt19937_64 rng(15);
    const auto fam = oracle::random_family(rng, 3, 3);
    try {
      select_train_target(fam);
      FAIL("expected insufficient families");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("insufficient families") != std::string::npos);
    }
  }

  TEST_CASE("spec validation") {
    SubsetSpec s;
    s.train_fraction_max = 0.0;
    CHECK_THROWS_AS(s.validate(), UsageError);
    s.train_fraction_max = 1.5;
    CHECK_THROWS_AS(s.validate(), UsageError);
    s = {};
    s.num_models = 0;
    CHECK_THROWS_AS(s.validate(), UsageError);
    s = {};
    s.target_fraction = 0.0;
    CHECK_THROWS_AS(s.validate(), UsageError);
  }

  TEST_CASE("scale-up cap picks the k largest sizes at or below it") {
    std::vector<CheckpointRecord> rs;
    for (std::int64_t n : {10, 20, 30, 40, 50, 60}) {
      CheckpointRecord r;
      r.family_id = "f";
      r.model_id = "m" + std::to_string(n);
      r.num_params = n;
      r.tokens_seen = r.total_tokens = 100;
      r.loss = 1.0;
      rs.push_back(r);
    }
    SubsetSpec s;
    s.num_models = 3;
    s.max_train_params = 40;
    const auto split = select_train_target(ScaledFamily("f", rs), s);
    CHECK(split.train.sizes() == std::vector<std::int64_t>{20, 30, 40});
    const auto down = downscale_split(ScaledFamily("f", rs), 3);
    CHECK(down.train.sizes() == std::vector<std::int64_t>{40, 50, 60});
    CHECK(down.target.sizes() == std::vector<std::int64_t>{10});
    const auto tr = transfer_split(ScaledFamily("f", rs), std::nullopt);
    CHECK(tr.train.sizes() == std::vector<std::int64_t>{50});
    CHECK(tr.target.sizes() == std::vector<std::int64_t>{60});
  }

  TEST_CASE("train flops match brute force") {
    std::mt19937_64 rng(16);
    for (int i = 0; i < 50; ++i) {
      const auto fam = oracle::random_family(rng);
      CHECK(train_flops(fam) == doctest::Approx(oracle::train_flops(oracle::recs(fam))).epsilon(1e-12));
    }
  }

  TEST_CASE("ingested flops override the 6ND estimate") {
    std::vector<CheckpointRecord> rs(2);
    for (int i = 0; i < 2; ++i) {
      rs[i].family_id = "f";
      rs[i].model_id = "m";
      rs[i].num_params = 10;
      rs[i].total_tokens = 100;
      rs[i].tokens_seen = 50 * (i + 1);
      rs[i].loss = 1.0;
    }
    CHECK(train_flops(ScaledFamily("f", rs)) == 6.0 * 10 * 100);
    rs[1].flops = 1234.0;
    CHECK(train_flops(ScaledFamily("f", rs)) == 1234.0);
  }
}
