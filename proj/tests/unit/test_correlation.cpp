#include <doctest.h>

#include <cmath>
#include <random>

#include "misem/correlation.hpp"
#include "support/error_check.hpp"

using namespace misem;
using namespace misem::stats;

using V = std::vector<double>;

TEST_CASE("perfect linear relation") {
  CHECK(pearson(V{1, 2, 3}, V{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("perfect inversion gives minus one everywhere") {
  const V x{1, 2, 3}, y{3, 2, 1};
  CHECK(pearson(x, y) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(spearman(x, y) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(kendall_tau_b(x, y) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("one swapped pair") {
  const V x{1, 2, 3}, y{1, 3, 2};
  CHECK(kendall_tau_b(x, y) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // 1 - 6 * (0 + 1 + 1) / (3 * 8)
  CHECK(spearman(x, y) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("five point closed forms") {
  const V x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
  // Centered: dx = [-2,-1,0,1,2], dy = [-1,-2,1,0,2]; sxy = 8, sxx = syy = 10.
  CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(spearman(x, y) == doctest::Approx(0.8).epsilon(1e-15));
  // 8 concordant, 2 discordant pairs.
  CHECK(kendall_tau_b(x, y) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("ties") {
  const V x{1, 2, 2, 3}, y{1, 2, 3, 4};
  CHECK(fractional_ranks(x) == V{1, 2.5, 2.5, 4});
  // 5 concordant, 0 discordant, one pair tied only in x: 5 / sqrt(5 * 6).
  CHECK(kendall_tau_b(x, y) == doctest::Approx(5.0 / std::sqrt(30.0)).epsilon(1e-15));
  // Ranks [1, 2.5, 2.5, 4] against [1, 2, 3, 4]: sxy = 4.5, sxx = 4.5, syy = 5.
  CHECK(spearman(x, y) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)).epsilon(1e-15));
  CHECK(kendall_tau_b(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  const V many_ties{3, 3, 1, 1, 2, 3};
  CHECK(kendall_tau_b(many_ties, many_ties) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("affine maps give plus or minus one") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    V x(2 + trial % 30);
    for (double& v : x) v = normal(rng);
    const double a = normal(rng) * 5.0, b = normal(rng) * 100.0;
    if (std::abs(a) < 1e-3) continue;
    V y;
    for (double v : x) y.push_back(a * v + b);
    CHECK(pearson(x, y) == doctest::Approx(a > 0 ? 1.0 : -1.0).epsilon(1e-9));
  }
}

TEST_CASE("rank correlations ignore monotone transforms") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> coarse(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 25;
    V x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 2 ? normal(rng) : coarse(rng);
      y[i] = normal(rng);
    }
    bool constant = true;
    for (double v : x) constant = constant && v == x[0];
    if (constant) continue;
    V fx, gy;
    for (double v : x) fx.push_back(std::exp(v));
    for (double v : y) gy.push_back(v * v * v + 2.0 * v);
    CHECK(spearman(fx, gy) == spearman(x, y));
    CHECK(kendall_tau_b(fx, gy) == kendall_tau_b(x, y));
  }
}

TEST_CASE("coefficients stay in range") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> small(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    V x(6), y(6);
    for (std::size_t i = 0; i < 6; ++i) {
      x[i] = small(rng);
      y[i] = small(rng);
    }
    try {
      for (double c : {pearson(x, y), spearman(x, y), kendall_tau_b(x, y)}) {
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
      }
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConstantInput);
    }
  }
}

TEST_CASE("invalid inputs") {
  CHECK_ERROR_CODE(pearson(V{1, 1, 1}, V{1, 2, 3}), ErrorCode::ConstantInput);
  CHECK_ERROR_CODE(spearman(V{1, 2, 3}, V{5, 5, 5}), ErrorCode::ConstantInput);
  CHECK_ERROR_CODE(kendall_tau_b(V{2, 2}, V{1, 3}), ErrorCode::ConstantInput);
  CHECK_ERROR_CODE(pearson(V{1, 2}, V{1, 2, 3}), ErrorCode::LengthMismatch);
  CHECK_ERROR_CODE(pearson(V{1}, V{1}), ErrorCode::InsufficientData);
  CHECK_ERROR_CODE(pearson(V{1, NAN}, V{1, 2}), ErrorCode::NonFiniteInput);
}
