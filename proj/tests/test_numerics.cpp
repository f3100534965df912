#include <doctest.h>

#include <cmath>

#include "acr/numerics.hpp"
#include "acr/random.hpp"

using namespace acr;

TEST_CASE("solve_spd on hand cases") {
  CHECK(solve_spd(Matrix::identity(2), {3.0, -1.0}) == Vector{3.0, -1.0});

  Matrix d(2, 2, {1.0, 0.0, 0.0, 4.0});
  const Vector x = solve_spd(d, {1.0, 1.0});
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(0.25));

  Matrix a(2, 2, {2.0, 1.0, 1.0, 2.0});
  const Vector z = solve_spd(a, {3.0, 3.0});
  CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_spd rejects indefinite input") {
  Matrix a(2, 2, {1.0, 2.0, 2.0, 1.0});
  CHECK_THROWS_AS(solve_spd(a, {1.0, 1.0}), NotPositiveDefinite);
}

TEST_CASE("solve_spd residual on random SPD matrices") {
  RngStream rng(42, 0);
  for (std::size_t dim = 1; dim <= 20; ++dim) {
    Matrix m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) m(i, j) = 2.0 * rng.uniform01() - 1.0;
    Matrix a(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        double s = (i == j) ? 1.0 : 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += m(k, i) * m(k, j);
        a(i, j) = s;
      }
    Vector b(dim);
    for (std::size_t i = 0; i < dim; ++i) b[i] = 4.0 * rng.uniform01() - 2.0;
    const Vector x = solve_spd(a, b);
    const Vector ax = a.multiply(x);
    double resid = 0.0, bnorm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      resid = std::max(resid, std::fabs(ax[i] - b[i]));
      bnorm = std::max(bnorm, std::fabs(b[i]));
    }
    CHECK(resid <= 1e-10 * std::max(bnorm, 1.0));
  }
}

TEST_CASE("integrate hand cases") {
  CHECK(integrate([](double) { return 1.0; }, 0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

  auto epan = [](double u) { return std::fabs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0; };
  CHECK(integrate(epan, -1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(integrate([&](double u) { return u * u * epan(u); }, -1.0, 1.0) ==
        doctest::Approx(0.2).epsilon(1e-10));
}

TEST_CASE("integrate is exact on cubics") {
  RngStream rng(7, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const double c0 = 2.0 * rng.uniform01() - 1.0, c1 = 2.0 * rng.uniform01() - 1.0;
    const double c2 = 2.0 * rng.uniform01() - 1.0, c3 = 2.0 * rng.uniform01() - 1.0;
    const double a = -2.0 * rng.uniform01(), b = 2.0 * rng.uniform01() + 0.1;
    auto poly = [&](double u) { return c0 + u * (c1 + u * (c2 + u * c3)); };
    auto anti = [&](double u) {
      return u * (c0 + u * (c1 / 2.0 + u * (c2 / 3.0 + u * c3 / 4.0)));
    };
    const double exact = anti(b) - anti(a);
    CHECK(integrate(poly, a, b, 1e-10) == doctest::Approx(exact).epsilon(1e-11));
  }
}

TEST_CASE("integrate reports subdivision exhaustion") {
  // Square-root singularity at the left endpoint: the panel estimates keep
  // disagreeing all the way down to the depth cap.
  auto f = [](double u) { return u > 0.0 ? 1.0 / std::sqrt(u) : 0.0; };
  CHECK_THROWS_AS(integrate(f, 0.0, 1.0, 1e-14), NoConvergence);
}

TEST_CASE("minimize_scalar hand cases") {
  const double x1 = minimize_scalar([](double x) { return (x - 2.0) * (x - 2.0); }, 0.0, 5.0, 1e-8);
  CHECK(std::fabs(x1 - 2.0) <= 1e-7);
  const double x2 = minimize_scalar([](double x) { return std::fabs(x); }, -1.0, 3.0, 1e-8);
  CHECK(std::fabs(x2) <= 1e-7);
}

TEST_CASE("minimize_scalar hits the vertex of random convex quadratics") {
  RngStream rng(3, 1);
  for (int rep = 0; rep < 50; ++rep) {
    const double v = 8.0 * (rng.uniform01() - 0.5);
    const double curv = 0.1 + 4.0 * rng.uniform01();
    const double lo = v - 1.0 - 5.0 * rng.uniform01();
    const double hi = v + 1.0 + 5.0 * rng.uniform01();
    const double x = minimize_scalar([&](double t) { return curv * (t - v) * (t - v); },
                                     lo, hi, 1e-8);
    CHECK(std::fabs(x - v) <= 1e-6);
  }
}

TEST_CASE("minimize_scalar matches a grid scan on a likelihood-shaped ratio") {
  // Three synthetic blocks: U_i(t) = a_i - t b_i; f = Q/2 * Ubar^2 / S.
  const double ab[3] = {2.4, 2.6, 2.55}, bb[3] = {0.95, 1.05, 1.0};
  auto f = [&](double t) {
    double ubar = 0.0;
    for (int i = 0; i < 3; ++i) ubar += ab[i] - t * bb[i];
    ubar /= 3.0;
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double d = (ab[i] - t * bb[i]) - ubar;
      s += d * d;
    }
    s /= 3.0;
    return 1.5 * ubar * ubar / std::max(s, 1e-300);
  };
  const int grid_n = 10000;
  double best_x = 0.0, best_f = f(0.0);
  for (int i = 1; i <= grid_n; ++i) {
    const double x = 5.0 * i / grid_n;
    if (f(x) < best_f) {
      best_f = f(x);
      best_x = x;
    }
  }
  const double x = minimize_scalar(f, 0.0, 5.0, 1e-10);
  CHECK(std::fabs(x - best_x) <= 5.0 / grid_n);
}

TEST_CASE("solve_nonlinear hand cases") {
  auto shift = [](const Vector& x) {
    return Vector{x[0] - 1.5, x[1] + 0.25};
  };
  const Vector r1 = solve_nonlinear(shift, {0.0, 0.0});
  CHECK(r1[0] == doctest::Approx(1.5).epsilon(1e-9));
  CHECK(r1[1] == doctest::Approx(-0.25).epsilon(1e-9));

  auto g = [](const Vector& x) {
    return Vector{x[0] * x[0] - 1.0, x[1] - 2.0};
  };
  const Vector r2 = solve_nonlinear(g, {2.0, 0.0});
  CHECK(std::fabs(r2[0] - 1.0) <= 1e-8);
  CHECK(std::fabs(r2[1] - 2.0) <= 1e-8);
  const Vector gr = g(r2);
  CHECK(max_abs(gr) <= 1e-9);
}

TEST_CASE("solve_nonlinear reports non-convergence with best iterate") {
  auto g = [](const Vector& x) {
    return Vector{x[0] * x[0] + 1.0};
  };
  CHECK_THROWS_AS(solve_nonlinear(g, {3.0}), NoConvergence);
  try {
    solve_nonlinear(g, {3.0});
  } catch (const NoConvergence& e) {
    REQUIRE(e.best.size() == 1);
    CHECK(std::fabs(e.best[0]) < 3.0);  // moved toward the flat minimum
  }
}

TEST_CASE("scan_minimize finds a narrow dip in a wide bracket") {
  auto f = [](double x) {
    const double d = x - 4.0;
    return 10.0 - 9.99 / (1.0 + 50.0 * d * d);
  };
  const double x = scan_minimize(f, -60.0, 60.0, 512, 1e-10);
  CHECK(std::fabs(x - 4.0) <= 1e-6);
}
