#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "sublin/core.hpp"
#include "sublin/kernels.hpp"

using namespace sublin;

namespace {

BoxGrid square_grid(int cells, double lo, double hi) {
  BoxGrid g;
  g.dim = 2;
  g.origin = make_point(lo, lo);
  g.spacing = (hi - lo) / cells;
  g.shape = {cells, cells, 1};
  return g;
}

}  // namespace

TEST_CASE("total_mass covers atoms and densities", "[core]") {
  Measure zero;
  zero.dim = 2;
  REQUIRE(total_mass(zero) == 0.0);

  Measure one_atom;
  one_atom.dim = 2;
  one_atom.atoms.push_back({make_point(0.3, -0.2), 2.5});
  REQUIRE(total_mass(one_atom) == 2.5);

  // density == 1 on a 4x4 grid with spacing 0.5: 16 cells * 0.25 volume
  BoxGrid g;
  g.dim = 2;
  g.origin = make_point(0.0, 0.0);
  g.spacing = 0.5;
  g.shape = {4, 4, 1};
  Measure unif;
  unif.dim = 2;
  unif.density = GridFunction(g, 1.0);
  REQUIRE(total_mass(unif) == Catch::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("total_mass is additive over disjoint supports", "[core]") {
  BoxGrid g = square_grid(8, 0.0, 1.0);
  GridFunction left(g, 0.0), right(g, 0.0), both(g, 0.0);
  for (std::size_t i = 0; i < left.size(); ++i) {
    const Point c = g.cell_center(i);
    const double v = 0.25 + c[0] + 2.0 * c[1];
    if (c[0] < 0.5) left[i] = v;
    else right[i] = v;
    both[i] = v;
  }
  Measure ml, mr, mb;
  ml.dim = mr.dim = mb.dim = 2;
  ml.density = left;
  mr.density = right;
  mb.density = both;
  REQUIRE(total_mass(mb) == Catch::Approx(total_mass(ml) + total_mass(mr)).epsilon(1e-12));
}

TEST_CASE("restrict_to_ball keeps strictly inside support", "[core]") {
  Measure far;
  far.dim = 2;
  far.atoms.push_back({make_point(2.0, 0.0), 1.0});
  REQUIRE(restrict_to_ball(far, make_point(0.0, 0.0), 1.0).is_zero());

  Measure at_center;
  at_center.dim = 2;
  at_center.atoms.push_back({make_point(0.0, 0.0), 1.5});
  const Measure kept = restrict_to_ball(at_center, make_point(0.0, 0.0), 1.0);
  REQUIRE(kept.atoms.size() == 1);
  REQUIRE(kept.atoms[0].mass == 1.5);
}

TEST_CASE("ball restriction area converges to pi r^2 under refinement", "[core]") {
  double errs[2];
  int level = 0;
  for (int cells : {32, 64}) {
    BoxGrid g = square_grid(cells, -1.0, 1.0);
    Measure m;
    m.dim = 2;
    m.density = GridFunction(g, 1.0);
    const Measure inside = restrict_to_ball(m, make_point(0.0, 0.0), 0.5);
    const double area = total_mass(inside);
    errs[level++] = std::abs(area - pi * 0.25);
    REQUIRE(total_mass(inside) <= total_mass(m));
  }
  REQUIRE(errs[1] < errs[0]);
  REQUIRE(errs[1] < 0.01);
}

TEST_CASE("restrict_to_ball is idempotent and mass-nonincreasing", "[core]") {
  BoxGrid g = square_grid(16, -1.0, 1.0);
  GridFunction f(g, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Point c = g.cell_center(i);
    f[i] = 1.0 + c[0] * c[0];
  }
  Measure m;
  m.dim = 2;
  m.density = f;
  m.atoms.push_back({make_point(0.1, 0.1), 0.5});
  m.atoms.push_back({make_point(0.9, 0.9), 0.25});

  const Point ctr = make_point(0.0, 0.0);
  const Measure once = restrict_to_ball(m, ctr, 0.6);
  const Measure twice = restrict_to_ball(once, ctr, 0.6);
  REQUIRE(once.atoms.size() == twice.atoms.size());
  REQUIRE(total_mass(once) == total_mass(twice));
  REQUIRE(once.density->values == twice.density->values);
  REQUIRE(total_mass(once) <= total_mass(m));
  for (const auto& a : once.atoms) REQUIRE(a.mass >= 0.0);
  for (double v : once.density->values) REQUIRE(v >= 0.0);
}

TEST_CASE("grid indexing round-trips and centers are cell midpoints", "[core]") {
  BoxGrid g;
  g.dim = 3;
  g.origin = make_point(-1.0, 0.0, 2.0);
  g.spacing = 0.25;
  g.shape = {4, 3, 5};
  REQUIRE(g.cell_count() == 60);
  REQUIRE(g.cell_volume() == Catch::Approx(0.015625));
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const auto idx = g.multi_index(i);
    REQUIRE(g.flat_index(idx) == i);
  }
  const Point c0 = g.cell_center(0);
  REQUIRE(c0[0] == Catch::Approx(-1.0 + 0.125));
  REQUIRE(c0[1] == Catch::Approx(0.125));
  REQUIRE(c0[2] == Catch::Approx(2.125));
}

TEST_CASE("validation rejects malformed grids and functions", "[core]") {
  BoxGrid g;
  g.dim = 2;
  g.origin = make_point(0.0, 0.0);
  g.spacing = 0.0;
  g.shape = {4, 4, 1};
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g.spacing = 0.5;
  g.shape = {0, 4, 1};
  REQUIRE_THROWS_AS(g.validate(), std::invalid_argument);
  g.shape = {4, 4, 1};

  GridFunction f(g, 1.0);
  f.values.pop_back();
  REQUIRE_THROWS_AS(f.validate(), std::invalid_argument);

  GridFunction nan_f(g, 1.0);
  nan_f[3] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(nan_f.validate(), std::invalid_argument);

  // +inf is a legal value: potentials are infinite at atoms
  GridFunction inf_f(g, 1.0);
  inf_f[3] = inf;
  REQUIRE_NOTHROW(inf_f.validate());
}

TEST_CASE("problem specs enforce the standing hypotheses", "[core]") {
  BoxGrid g = square_grid(4, 0.0, 1.0);
  Measure dens;
  dens.dim = 2;
  dens.density = GridFunction(g, 1.0);

  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.terms.push_back({dens, 1.5});
  p.gamma = 1.0;
  p.omega.dim = 2;
  REQUIRE_THROWS_WITH(p.validate(), Catch::Matchers::ContainsSubstring("q must lie in (0,1)"));

  p.terms[0].q = 0.5;
  REQUIRE_NOTHROW(p.validate());

  ProblemSpec zero = p;
  zero.terms[0].sigma = Measure{};
  zero.terms[0].sigma.dim = 2;
  REQUIRE_THROWS_WITH(zero.validate(), Catch::Matchers::ContainsSubstring("zero"));

  ProblemSpec atomic = p;
  atomic.terms[0].sigma.atoms.push_back({make_point(0.5, 0.5), 1.0});
  REQUIRE_THROWS_WITH(atomic.validate(), Catch::Matchers::ContainsSubstring("atomic sigma"));

  ProblemSpec bad_gamma = p;
  bad_gamma.gamma = 0.0;
  REQUIRE_THROWS_AS(bad_gamma.validate(), std::invalid_argument);
}

TEST_CASE("xorshift stream is deterministic and uniform on [0,1)", "[core]") {
  Rng a(20240917ull), b(20240917ull);
  for (int i = 0; i < 1000; ++i) {
    const double x = a.uniform();
    REQUIRE(x == b.uniform());
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  Rng c(1ull);
  double mean = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) mean += c.uniform();
  mean /= trials;
  REQUIRE(std::abs(mean - 0.5) < 0.01);
}
