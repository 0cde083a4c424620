// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "scalaw/errors.hpp"
#include "scalaw/meta.hpp"
#include "scalaw/synth.hpp"

using namespace scalaw;

namespace {

const LawParams kTruth{std::log(1.69), std::log(406.4), 0.34, std::log(410.7), 0.28};

std::vector<GridCell> flop_grid(std::size_t rows, std::size_t cols, const std::vector<double>& v) {
  std::vector<GridCell> cells;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      GridCell g;
      g.row = r;
      g.col = c;
      g.train_flops = v[r * cols + c];
      cells.push_back(g);
    }
  return cells;
}

double bilinear_edge(const std::vector<double>& v, std::size_t cols, GridPoint p) {
  const double fx = std::floor(p.x), fy = std::floor(p.y);
  const auto x0 = (std::size_t)fx, y0 = (std::size_t)fy;
  const double tx = p.x - fx, ty = p.y - fy;
  auto at = [&](std::size_t y, std::size_t x) { return v[y * cols + x]; };
  if (tx == 0.0 && ty == 0.0) return at(y0, x0);
  if (ty == 0.0) return at(y0, x0) + tx * (at(y0, x0 + 1) - at(y0, x0));
  return at(y0, x0) + ty * (at(y0 + 1, x0) - at(y0, x0));
}

ScaledFamily synthetic(double noise, int sizes = 6) {
  SynthSpec s;
  s.truth = kTruth;
  s.sizes = log_spaced_sizes(1e7, 1e9, sizes);
  s.tokens_per_run = {2'000'000'000};
  s.checkpoints_per_run = 12;
  s.noise_sigma = noise;
  s.rng_seed = 5;
  return generate(s);
}

}  // namespace

TEST_SUITE("contours") {
  TEST_CASE("frozen two-by-two segment") {
    const std::vector<double> v{0, 0, 4, 12};
    const std::vector<double> level{3};
    const auto cl = iso_flop_contours(flop_grid(2, 2, v), 2, 2, level);
    REQUIRE(cl.size() == 1);
    REQUIRE(cl[0].polylines.size() == 1);
    auto pl = cl[0].polylines[0];
    REQUIRE(pl.size() == 2);
    if (pl[0].x > pl[1].x) std::swap(pl[0], pl[1]);
    CHECK(pl[0].x == 0.0);
    CHECK(pl[0].y == doctest::Approx(0.75));
    CHECK(pl[1].x == 1.0);
    CHECK(pl[1].y == doctest::Approx(0.25));
  }

  TEST_CASE("uniform grid and out-of-range levels") {
    const std::vector<double> v(9, 5.0);
    const std::vector<double> levels{5.0, 7.0};
    const auto cl = iso_flop_contours(flop_grid(3, 3, v), 3, 3, levels);
    CHECK(cl[0].covers_all);
    CHECK(cl[0].polylines.size() == 1);
    CHECK_FALSE(cl[1].covers_all);
    CHECK(cl[1].polylines.empty());
  }

  TEST_CASE("non-finite flops are rejected") {
    const std::vector<double> v{1, 2, NAN, 4};
    const std::vector<double> levels{1.5};
    CHECK_THROWS_AS(iso_flop_contours(flop_grid(2, 2, v), 2, 2, levels), DataError);
  }

  TEST_CASE("every contour point interpolates to its level") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 100);
    for (int t = 0; t < 40; ++t) {
      const std::size_t rows = 2 + t % 4, cols = 2 + (t / 4) % 4;
      std::vector<double> v(rows * cols);
      for (auto& x : v) x = u(rng);
      const std::vector<double> levels{25, 50, 75};
      const auto cl = iso_flop_contours(flop_grid(rows, cols, v), rows, cols, levels);
      for (const auto& c : cl)
        for (const auto& pl : c.polylines) {
          CHECK(pl.size() >= 2);
          for (const auto& p : pl) {
            CHECK(p.x >= 0.0);
            CHECK(p.x <= cols - 1.0);
            CHECK(p.y >= 0.0);
            CHECK(p.y <= rows - 1.0);
            CHECK(bilinear_edge(v, cols, p) == doctest::Approx(c.level).epsilon(1e-9));
          }
        }
    }
  }

  TEST_CASE("monotone rows give one polyline spanning the grid") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const std::vector<double> levels{6.5};
    const auto cl = iso_flop_contours(flop_grid(3, 4, v), 3, 4, levels);
    REQUIRE(cl[0].polylines.size() == 1);
  }

  TEST_CASE("axis interpolation") {
    const std::vector<double> vals{3, 4, 6};
    CHECK(axis_value_at(vals, 0.0) == 3.0);
    CHECK(axis_value_at(vals, 1.5) == 5.0);
    CHECK(axis_value_at(vals, 2.0) == 6.0);
  }
}

TEST_SUITE("stars") {
  TEST_CASE("stars match a brute-force scan") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0, 1);
    std::uniform_int_distribution<int> flops(1, 6);
    for (int t = 0; t < 200; ++t) {
      std::vector<GridCell> cells(12);
      std::vector<oracle::StarCell> ref(12);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        cells[i].train_flops = flops(rng);
        cells[i].num_models = 3 + (std::size_t)flops(rng) % 3;
        if (u(rng) < 0.8) cells[i].are = std::round(u(rng) * 20) / 100.0;
        ref[i] = {cells[i].are, cells[i].train_flops, cells[i].num_models};
      }
      const auto stars = efficiency_stars(cells);
      REQUIRE(stars.size() == 3);
      for (const auto& s : stars) CHECK(s.cell == oracle::star(ref, s.threshold));
    }
  }
}

TEST_SUITE("grid") {
  TEST_CASE("grid cells are independent of the thread count") {
    const auto fam = synthetic(0.01);
    GridAxes axes;
    axes.row_values = {3, 4, 5};
    axes.col_values = {0.3, 1.0};
    FitConfig c;
    c.restarts = 8;
    const auto a = run_grid(fam, axes, c, 1);
    const auto b = run_grid(fam, axes, c, 4);
    REQUIRE(a.cells.size() == 6);
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      CHECK(a.cells[i].are == b.cells[i].are);
      CHECK(a.cells[i].train_flops == b.cells[i].train_flops);
    }
    for (const auto& cell : a.cells) CHECK(cell.ok());
  }

  TEST_CASE("infeasible cells carry a failure marker") {
    const auto fam = synthetic(0.0, 4);
    GridAxes axes;
    axes.row_values = {2, 3};
    axes.col_values = {1.0};
    FitConfig c;
    c.restarts = 4;
    const auto g = run_grid(fam, axes, c);
    CHECK_FALSE(g.at(0, 0).ok());
    CHECK(g.at(0, 0).failure == kFailInsufficient);
    CHECK(g.at(1, 0).ok());
  }

  TEST_CASE("train flops grow along both axes") {
    const auto fam = synthetic(0.0);
    GridAxes axes;
    axes.row_values = {3, 4, 5};
    axes.col_values = {0.2, 0.5, 1.0};
    FitConfig c;
    c.restarts = 4;
    const auto g = run_grid(fam, axes, c, 2);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t col = 0; col < 3; ++col) {
        if (r > 0) CHECK(g.at(r, col).train_flops > g.at(r - 1, col).train_flops);
        if (col > 0) CHECK(g.at(r, col).train_flops > g.at(r, col - 1).train_flops);
      }
  }
}

TEST_SUITE("cv") {
  TEST_CASE("leave-one-size-out folds") {
    const auto fam = synthetic(0.0);
    FitConfig c;
    c.restarts = 8;
    const auto rows = loo_family_cv(fam, c);
    REQUIRE(rows.size() == 5);
    for (const auto& r : rows) {
      REQUIRE(r.are.has_value());
      CHECK(*r.are < 1e-6);
    }
    CHECK_THROWS_AS(loo_family_cv(synthetic(0.0, 3), c), DataError);
  }
}

TEST_SUITE("pca") {
  TEST_CASE("rank-one parameter variation") {
    std::vector<LawParams> fits;
    const std::array<double, 5> dir{0.1, 1.0, 0.05, -0.7, 0.02};
    for (int i = 0; i < 8; ++i) {
      auto a = kTruth.to_array();
      for (int k = 0; k < 5; ++k) a[k] += (i - 3.5) * dir[k];
      fits.push_back(LawParams::from_array(a));
    }
    for (bool standardize : {true, false}) {
      const auto r = pca_params(fits, standardize);
      CHECK(r.explained_variance_ratio[0] >= 0.999999);
      const auto back = pca_reconstruct(r);
      for (std::size_t i = 0; i < fits.size(); ++i)
        for (int k = 0; k < 5; ++k)
          CHECK(back[i][k] == doctest::Approx(fits[i].to_array()[k]).epsilon(1e-9));
    }
  }

  TEST_CASE("components are orthonormal, sorted, sign-fixed") {
    std::mt19937_64 rng(51);
    std::normal_distribution<double> z;
    std::vector<LawParams> fits;
    for (int i = 0; i < 20; ++i) fits.push_back({z(rng), z(rng), z(rng), z(rng), z(rng)});
    const auto r = pca_params(fits);
    REQUIRE(r.components.size() == 5);
    double total = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      total += r.explained_variance_ratio[i];
      if (i) CHECK(r.eigenvalues[i] <= r.eigenvalues[i - 1]);
      std::size_t arg = 0;
      for (std::size_t k = 1; k < 5; ++k)
        if (std::fabs(r.components[i][k]) > std::fabs(r.components[i][arg])) arg = k;
      CHECK(r.components[i][arg] > 0);
      for (std::size_t j = 0; j < 5; ++j) {
        double dot = 0;
        for (std::size_t k = 0; k < 5; ++k) dot += r.components[i][k] * r.components[j][k];
        CHECK(dot == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0).epsilon(1e-10));
      }
    }
    CHECK(total == doctest::Approx(1.0));
    // Correlation-matrix eigenvalues sum to the dimension.
    double eig = 0;
    for (double e : r.eigenvalues) eig += e;
    CHECK(eig == doctest::Approx(5.0));
  }

  TEST_CASE("too few fits") {
    const std::vector<LawParams> one{kTruth};
    CHECK_THROWS_AS(pca_params(one), DataError);
  }
}
