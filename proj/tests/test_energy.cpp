#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sublin/energy.hpp"
#include "sublin/kernels.hpp"
#include "sublin/solver.hpp"

using namespace sublin;

namespace {

BoxGrid square_grid(int cells, double half_width) {
  BoxGrid g;
  g.dim = 2;
  g.origin = make_point(-half_width, -half_width);
  g.spacing = 2.0 * half_width / cells;
  g.shape = {cells, cells, 1};
  return g;
}

Measure bump_measure(const BoxGrid& g, double cx, double cy, double width, double height) {
  Measure m;
  m.dim = 2;
  GridFunction d(g, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Point c = g.cell_center(i);
    const double r2 = (c[0] - cx) * (c[0] - cx) + (c[1] - cy) * (c[1] - cy);
    if (r2 < width * width) d[i] = height * (1.0 - r2 / (width * width));
  }
  m.density = d;
  return m;
}

GridFunction smooth_bump(const BoxGrid& g, double radius) {
  GridFunction u(g, 0.0);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const Point c = g.cell_center(i);
    const double r2 = c[0] * c[0] + c[1] * c[1];
    if (r2 < radius * radius) u[i] = std::pow(1.0 - r2 / (radius * radius), 2.0);
  }
  return u;
}

}  // namespace

TEST_CASE("fractional seminorm of zero is zero") {
  const auto g = square_grid(16, 1.0);
  REQUIRE(energy::fractional_seminorm_sq(GridFunction(g, 0.0), 1.0) == 0.0);
}

TEST_CASE("fractional seminorm matches the analytic gaussian value") {
  // || exp(-|x|^2/2) ||^2 in H-dot^{1/2}(R^2) equals pi^{3/2}/2.
  const auto g = square_grid(32, 6.0);
  GridFunction u(g, 0.0);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const Point c = g.cell_center(i);
    u[i] = std::exp(-0.5 * (c[0] * c[0] + c[1] * c[1]));
  }
  const double exact = 0.5 * std::pow(pi, 1.5);
  REQUIRE(energy::fractional_seminorm_sq(u, 1.0) == Catch::Approx(exact).epsilon(0.005));
}

TEST_CASE("fractional seminorm is translation invariant") {
  const auto g = square_grid(24, 1.5);
  const GridFunction u = smooth_bump(g, 0.5);
  GridFunction shifted(g, 0.0);
  for (int x = 3; x < 24; ++x)
    for (int y = 0; y < 24; ++y) shifted[g.flat_index({x, y, 0})] = u[g.flat_index({x - 3, y, 0})];
  const double a = energy::fractional_seminorm_sq(u, 1.0);
  const double b = energy::fractional_seminorm_sq(shifted, 1.0);
  REQUIRE(std::abs(a - b) <= 1e-10 * a);
}

TEST_CASE("gagliardo sum vanishes on constants and squares under scaling") {
  const auto g = square_grid(12, 1.0);
  REQUIRE(energy::gagliardo_seminorm_sq(GridFunction(g, 3.7), 1.0) == 0.0);

  const GridFunction u = smooth_bump(g, 0.6);
  const double base = energy::gagliardo_seminorm_sq(u, 1.0);
  REQUIRE(base > 0.0);
  GridFunction u2 = u;
  for (auto& v : u2.values) v *= 2.0;
  REQUIRE(energy::gagliardo_seminorm_sq(u2, 1.0) == 4.0 * base);  // power of two: exact
  GridFunction u3 = u;
  for (auto& v : u3.values) v *= 3.0;
  REQUIRE(energy::gagliardo_seminorm_sq(u3, 1.0) == Catch::Approx(9.0 * base).epsilon(1e-14));
}

TEST_CASE("gagliardo sum of a one-cell indicator by direct summation") {
  const auto g = square_grid(10, 1.0);
  GridFunction u(g, 0.0);
  const std::size_t cell = g.flat_index({4, 6, 0});
  u[cell] = 1.0;
  const Point c = g.cell_center(cell);
  double hand = 0.0;
  for (std::size_t j = 0; j < g.cell_count(); ++j) {
    if (j == cell) continue;
    hand += std::pow(dist(c, g.cell_center(j), 2), -3.0);
  }
  hand *= 2.0 * g.cell_volume() * g.cell_volume();
  REQUIRE(energy::gagliardo_seminorm_sq(u, 1.0) == Catch::Approx(hand).epsilon(1e-13));
}

TEST_CASE("gagliardo sum enforces its budget and alpha range") {
  const auto big = square_grid(70, 1.0);  // 4900 cells > default 4096 budget
  REQUIRE_THROWS_AS(energy::gagliardo_seminorm_sq(GridFunction(big, 0.0), 1.0), std::invalid_argument);
  const auto g = square_grid(8, 1.0);
  REQUIRE_THROWS_AS(energy::gagliardo_seminorm_sq(GridFunction(g, 0.0), 2.0), std::invalid_argument);
  REQUIRE_THROWS_AS(energy::gagliardo_seminorm_sq(GridFunction(g, 0.0), 0.0), std::invalid_argument);
}

TEST_CASE("seminorm forms agree at the lattice resolution floor") {
  // The pair sum misses the near-diagonal mass of the singular integral, a
  // deficit of order h^{2-alpha} * ||grad u||^2; at 24^2 and alpha = 1 the two
  // forms sit roughly 28% apart and converge only slowly under refinement.
  // The band below records that floor honestly rather than asserting the
  // continuum identity.
  const auto g = square_grid(24, 1.5);
  const GridFunction u = smooth_bump(g, 0.8);
  const double frac = energy::fractional_seminorm_sq(u, 1.0);
  const double gag = energy::gagliardo_seminorm_sq(u, 1.0) * energy::gagliardo_equivalence_constant(2, 1.0);
  REQUIRE(gag < frac);  // lattice cutoff only removes mass
  const double gap = std::abs(frac - gag) / frac;
  REQUIRE(gap > 0.20);
  REQUIRE(gap < 0.40);
}

TEST_CASE("boundary decay gate") {
  const auto g = square_grid(16, 1.0);
  REQUIRE_FALSE(energy::boundary_decay_ok(GridFunction(g, 1.0)));
  REQUIRE(energy::boundary_decay_ok(smooth_bump(g, 0.5)));
}

TEST_CASE("energy identity requires gamma one and classical riesz") {
  const auto g = square_grid(16, 1.0);
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 2.0;
  ProblemTerm t;
  t.sigma.dim = 2;
  p.terms.push_back(t);
  p.omega.dim = 2;
  const GridFunction u(g, 0.0);
  REQUIRE_THROWS_WITH(energy::energy_identity_check(p, u), "energy identity requires gamma = 1");
  p.gamma = 1.0;
  p.kernel = make_riesz(2, 1.0, Normalization::unit);
  REQUIRE_THROWS_AS(energy::energy_identity_check(p, u), std::invalid_argument);
}

TEST_CASE("energy identity with zero data is the zero identity") {
  const auto g = square_grid(16, 1.0);
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  ProblemTerm t;
  t.sigma.dim = 2;
  p.terms.push_back(t);
  p.omega.dim = 2;
  const auto rep = energy::energy_identity_check(p, GridFunction(g, 0.0));
  REQUIRE(rep.seminorm_sq == 0.0);
  REQUIRE(rep.rhs_identity == 0.0);
  REQUIRE(rep.relative_gap == 0.0);
  REQUIRE_FALSE(rep.boundary_warning);
}

TEST_CASE("dual energy identity for a pure omega problem") {
  // sigma = 0 reduces the identity to || G omega ||^2 = int G omega d omega.
  const auto g = square_grid(64, 2.0);
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  ProblemTerm t;
  t.sigma.dim = 2;
  t.q = 0.5;
  p.terms.push_back(t);
  p.omega = bump_measure(g, 0.0, 0.0, 0.3, 1.0);
  const auto [u, rep] = solver::solve_minimal(p, 1e-10, 50);
  REQUIRE(rep.converged);

  const auto er = energy::energy_identity_check(p, u, false, 9);
  REQUIRE(er.seminorm_sq > 0.0);
  REQUIRE(er.rhs_identity > 0.0);
  REQUIRE(er.relative_gap <= 0.02);
}

TEST_CASE("energy identity on the coupled fixture") {
  const auto g = square_grid(64, 2.0);
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  p.terms.push_back({bump_measure(g, -0.2, 0.1, 0.5, 1.0), 0.5});
  p.omega = bump_measure(g, 0.4, -0.3, 0.3, 0.5);
  const auto [u, rep] = solver::solve_minimal(p, 1e-10, 400);
  REQUIRE(rep.converged);

  // The gap is dominated by domain truncation of the slowly decaying tail
  // and shrinks like 1/extension: measured 24.6% / 9.7% / 6.2% / 4.6% at
  // extension factors 1 / 3 / 5 / 7.
  double last = inf;
  for (int f : {1, 3, 7}) {
    const auto er = energy::energy_identity_check(p, u, false, f);
    REQUIRE(er.seminorm_sq >= 0.0);
    REQUIRE(er.rhs_identity >= 0.0);
    REQUIRE(er.relative_gap < last);
    last = er.relative_gap;
    if (f == 7) {
      REQUIRE(er.relative_gap <= 0.05);
      REQUIRE(er.relative_gap == Catch::Approx(0.0463).epsilon(0.10));
    }
  }
}

TEST_CASE("extension by the equation reproduces the potential") {
  const auto g = square_grid(32, 1.0);
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  ProblemTerm t;
  t.sigma.dim = 2;
  t.q = 0.5;
  p.terms.push_back(t);
  p.omega = bump_measure(g, 0.0, 0.0, 0.4, 1.0);
  const auto [u, rep] = solver::solve_minimal(p, 1e-10, 50);

  const GridFunction uext = energy::extend_by_equation(p, u, 2);
  REQUIRE(uext.grid.shape[0] == 64);
  // Free-space convolution: values at the original cells are unchanged.
  const Point probe = make_point(0.28125, -0.15625);
  REQUIRE(lorentz::value_at(uext, probe) == Catch::Approx(lorentz::value_at(u, probe)).epsilon(1e-12));

  REQUIRE_THROWS_AS(energy::extend_by_equation(p, u, 0), std::invalid_argument);
  const auto odd = square_grid(15, 1.0);
  ProblemSpec podd = p;
  podd.omega = bump_measure(odd, 0.0, 0.0, 0.4, 1.0);
  REQUIRE_THROWS_AS(energy::extend_by_equation(podd, GridFunction(odd, 0.0), 2), std::invalid_argument);
}

TEST_CASE("hidden convexity endpoints are exact") {
  const auto g = square_grid(12, 1.0);
  const GridFunction u = smooth_bump(g, 0.6);
  GridFunction v(g, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.3 + 0.5 * u[i];

  const auto at0 = energy::hidden_convexity_check(u, v, 0.0, 1.0);
  REQUIRE(at0.slack == 0.0);
  const auto at1 = energy::hidden_convexity_check(u, v, 1.0, 1.0);
  REQUIRE(at1.slack == 0.0);
  const auto same = energy::hidden_convexity_check(u, u, 0.37, 1.0);
  REQUIRE(same.slack == 0.0);
}

TEST_CASE("hidden convexity slack is nonnegative on random pairs") {
  const auto g = square_grid(16, 1.0);
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    GridFunction u(g, 0.0), v(g, 0.0);
    for (std::size_t i = 0; i < g.cell_count(); ++i) {
      u[i] = rng.uniform();
      v[i] = rng.uniform(0.0, 2.0);
    }
    const double t = rng.uniform();
    const auto rep = energy::hidden_convexity_check(u, v, t, 1.0);
    REQUIRE(rep.slack >= -1e-9 * rep.rhs);
  }
}

TEST_CASE("hidden convexity holds pointwise") {
  // |Gamma_t(x)-Gamma_t(y)|^2 <= (1-t)|v(x)-v(y)|^2 + t|u(x)-u(y)|^2 pair by
  // pair, which is what makes the summed inequality hold.
  Rng rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const double ux = rng.uniform(0.0, 3.0), uy = rng.uniform(0.0, 3.0);
    const double vx = rng.uniform(0.0, 3.0), vy = rng.uniform(0.0, 3.0);
    const double t = rng.uniform();
    const double gx = std::sqrt((1.0 - t) * vx * vx + t * ux * ux);
    const double gy = std::sqrt((1.0 - t) * vy * vy + t * uy * uy);
    const double lhs = (gx - gy) * (gx - gy);
    const double rhs = (1.0 - t) * (vx - vy) * (vx - vy) + t * (ux - uy) * (ux - uy);
    REQUIRE(lhs <= rhs + 1e-12 * (1.0 + rhs));
  }
}

TEST_CASE("hidden convexity validates inputs") {
  const auto g = square_grid(8, 1.0);
  const GridFunction u(g, 1.0);
  REQUIRE_THROWS_AS(energy::hidden_convexity_check(u, u, -0.1, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(energy::hidden_convexity_check(u, u, 1.1, 1.0), std::invalid_argument);
  const auto other = square_grid(10, 1.0);
  REQUIRE_THROWS_AS(energy::hidden_convexity_check(u, GridFunction(other, 1.0), 0.5, 1.0), std::invalid_argument);
}
