#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sublin/core.hpp"
#include "sublin/kernels.hpp"
#include "sublin/potentials.hpp"
#include "sublin/solver.hpp"

using namespace sublin;

namespace {

BoxGrid square_grid(int cells, double half_width = 1.0) {
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

ProblemSpec standard_problem(int cells) {
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  const BoxGrid g = square_grid(cells);
  p.terms.push_back({bump_measure(g, -0.2, 0.1, 0.5, 1.0), 0.5});
  p.omega = bump_measure(g, 0.4, -0.3, 0.3, 0.5);
  return p;
}

}  // namespace

TEST_CASE("scalar fixed point u = sqrt(u) + 2", "[solver]") {
  const Point p0 = make_point(0.0, 0.0);
  ProblemSpec p;
  p.kernel = make_matrix_kernel(2, {p0}, {1.0});
  p.gamma = 1.0;
  Measure sig;
  sig.dim = 2;
  sig.atoms.push_back({p0, 1.0});
  p.terms.push_back({sig, 0.5});
  Measure om;
  om.dim = 2;
  om.atoms.push_back({p0, 2.0});
  p.omega = om;

  const auto [u, rep] = solver::solve_minimal(p, 1e-13, 200);
  REQUIRE(rep.converged);
  REQUIRE(u[0] == Catch::Approx(4.0).epsilon(1e-12));  // u^2 - 5u + 4 = 0, ascending branch
  REQUIRE(rep.monotonicity_violations == 0);
  REQUIRE(rep.final_residual_fp < 1e-12);
  REQUIRE(rep.q_max == 0.5);
  for (std::size_t k = 1; k + 1 < rep.residual_history.size(); ++k)
    REQUIRE(rep.residual_history[k + 1] <= rep.residual_history[k] * (1.0 + 1e-9));
}

TEST_CASE("per-term starts are numerical subsolutions", "[solver]") {
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  const BoxGrid g = square_grid(20);
  p.terms.push_back({bump_measure(g, -0.2, 0.1, 0.5, 1.0), 0.25});
  p.terms.push_back({bump_measure(g, 0.3, 0.2, 0.4, 0.8), 0.5});
  p.omega.dim = 2;  // zero: the subsolution property concerns the sigma terms alone

  const auto starts = solver::initial_lower(p);
  REQUIRE(starts.size() == 2);
  for (std::size_t ti = 0; ti < p.terms.size(); ++ti) {
    ProblemSpec single = p;
    single.terms = {p.terms[ti]};
    const GridFunction ts = solver::iterate_once(single, starts[ti]);
    double scale = 0.0;
    for (double v : starts[ti].values) scale = std::max(scale, v);
    REQUIRE(scale > 0.0);
    for (std::size_t i = 0; i < ts.size(); ++i)
      REQUIRE(ts[i] >= starts[ti][i] - 1e-6 * scale);
  }
}

TEST_CASE("grid solve converges with monotone iterates", "[solver]") {
  const ProblemSpec p = standard_problem(16);
  const auto [u, rep] = solver::solve_minimal(p, 1e-10, 300);
  REQUIRE(rep.converged);
  REQUIRE(rep.conditions_ok);
  REQUIRE(rep.monotonicity_violations == 0);
  REQUIRE(rep.final_residual_fp <= 1e-9);
  REQUIRE(solver::pointwise_lower_violation(p, u) <= 1e-9);
  REQUIRE(rep.term_norms.size() == 1);
  REQUIRE(rep.term_norms[0] > 0.0);
  REQUIRE(rep.lorentz_norm > 0.0);
  // fitted closed bound dominates the witnessed term norms
  REQUIRE(rep.c1_fitted > 0.0);
  REQUIRE(std::isfinite(rep.norm_bound));
  for (double tn : rep.term_norms) REQUIRE(tn <= rep.norm_bound * (1.0 + 1e-9));
  for (std::size_t k = 1; k + 1 < rep.residual_history.size(); ++k)
    REQUIRE(rep.residual_history[k + 1] <= rep.residual_history[k] * (1.0 + 1e-9));
}

TEST_CASE("solution is monotone in the data", "[solver]") {
  const ProblemSpec base = standard_problem(14);
  std::vector<GridFunction> sols;
  for (double lam : {0.5, 1.0, 2.0}) {
    ProblemSpec p = base;
    for (auto& v : p.terms[0].sigma.density->values) v *= lam;
    sols.push_back(solver::solve_minimal(p, 1e-11, 300).first);
  }
  for (std::size_t i = 0; i < sols[0].size(); ++i) {
    REQUIRE(sols[0][i] <= sols[1][i] + 1e-8);
    REQUIRE(sols[1][i] <= sols[2][i] + 1e-8);
  }
}

TEST_CASE("residual detects perturbations of the fixed point", "[solver]") {
  const ProblemSpec p = standard_problem(16);
  auto [u, rep] = solver::solve_minimal(p, 1e-11, 300);
  REQUIRE(solver::residual(p, u) <= 2e-11);
  GridFunction pert = u;
  const std::size_t idx = u.grid.flat_index({8, 8, 0});
  pert[idx] += 1e-3;
  const double r = solver::residual(p, pert);
  REQUIRE(r >= 0.5e-3);
  REQUIRE(r <= 1.5e-3);
}

TEST_CASE("pure-omega problems return the potential in one step", "[solver]") {
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  const BoxGrid g = square_grid(12);
  Measure zero_sigma;
  zero_sigma.dim = 2;
  p.terms.push_back({zero_sigma, 0.5});
  p.omega = bump_measure(g, 0.0, 0.0, 0.5, 1.0);

  const auto [u, rep] = solver::solve_minimal(p, 1e-12, 10);
  REQUIRE(rep.converged);
  REQUIRE(rep.iterate_count == 1);
  REQUIRE(rep.final_residual_fp == 0.0);
  const GridFunction want = potentials::potential_grid_fft(p.kernel, p.omega);
  for (std::size_t i = 0; i < u.size(); ++i) REQUIRE(u[i] == Catch::Approx(want[i]).epsilon(1e-13));
}

TEST_CASE("downward relaxation from a supersolution", "[solver]") {
  const ProblemSpec p = standard_problem(16);
  const auto [u, rep] = solver::solve_minimal(p, 1e-11, 300);

  GridFunction twice = u;
  for (auto& v : twice.values) v *= 2.0;
  const auto [v, drep] = solver::downward_solve(p, twice, 1e-11, 300);
  REQUIRE(drep.converged);
  REQUIRE(drep.monotonicity_violations == 0);
  double gap = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) gap = std::max(gap, std::abs(v[i] - u[i]));
  REQUIRE(gap <= 1e-6);

  GridFunction half = u;
  for (auto& vv : half.values) vv *= 0.5;
  REQUIRE_THROWS_WITH(solver::downward_solve(p, half, 1e-11, 300),
                      Catch::Matchers::ContainsSubstring("not a numerical supersolution"));
}

TEST_CASE("failed finiteness conditions warn but do not block", "[solver]") {
  ProblemSpec p;
  p.kernel = make_riesz(2, 1.0);
  p.gamma = 1.0;
  const BoxGrid g = square_grid(16);
  p.terms.push_back({bump_measure(g, -0.4, -0.4, 0.3, 1.0), 0.5});
  Measure atom;
  atom.dim = 2;
  atom.atoms.push_back({make_point(0.5625, 0.5625), 1.0});  // exactly on a cell center
  p.omega = atom;  // atomic omega: int (G omega)^gamma d omega = +inf

  const auto [u, rep] = solver::solve_minimal(p, 1e-9, 300);
  REQUIRE_FALSE(rep.conditions_ok);
  REQUIRE(rep.converged);
  REQUIRE(rep.monotonicity_violations == 0);
  bool saw_inf = false, saw_finite = false;
  for (double v : u.values) ((v == inf) ? saw_inf : saw_finite) = true;
  REQUIRE(saw_inf);  // the atom cell carries the genuine singularity
  REQUIRE(saw_finite);
}

TEST_CASE("two coupled terms on a finite kernel", "[solver]") {
  const Point p0 = make_point(0.0, 0.0);
  const Point p1 = make_point(1.0, 0.0);
  ProblemSpec p;
  p.kernel = make_matrix_kernel(2, {p0, p1}, {1.0, 0.5, 0.5, 2.0});
  p.gamma = 1.0;
  Measure s0;
  s0.dim = 2;
  s0.atoms.push_back({p0, 1.0});
  Measure s1;
  s1.dim = 2;
  s1.atoms.push_back({p1, 0.5});
  p.terms.push_back({s0, 0.25});
  p.terms.push_back({s1, 0.5});
  Measure om;
  om.dim = 2;
  om.atoms.push_back({p0, 1.0});
  p.omega = om;

  const auto [u, rep] = solver::solve_minimal(p, 1e-13, 400);
  REQUIRE(rep.converged);
  REQUIRE(rep.monotonicity_violations == 0);
  REQUIRE(rep.q_max == 0.5);
  // the returned iterate satisfies the equation itself
  const GridFunction tu = solver::iterate_once(p, u);
  REQUIRE(tu[0] == Catch::Approx(u[0]).epsilon(1e-11));
  REQUIRE(tu[1] == Catch::Approx(u[1]).epsilon(1e-11));
  REQUIRE(solver::pointwise_lower_violation(p, u) <= 1e-9);
}

TEST_CASE("young inequality gap", "[solver]") {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const double a = rng.uniform(0.0, 3.0);
    const double b = rng.uniform(0.0, 3.0);
    const double q = rng.uniform(0.1, 0.9);
    REQUIRE(solver::young_gap(a, b, q) >= -1e-12);
  }
  // equality at the coupled pair (a, b) = (t^{1-q}, t^q)
  for (double t : {0.3, 1.0, 2.5}) {
    const double q = 0.4;
    REQUIRE(solver::young_gap(std::pow(t, 1.0 - q), std::pow(t, q), q) == Catch::Approx(0.0).margin(1e-12));
  }
}
