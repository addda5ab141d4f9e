// Command-line front door: configure problems, run solves, checks, verifies,
// and parameter sweeps; artifacts land in the configured output directory.
//
// Exit codes (stable contract): 0 success, 1 usage or config error,
// 2 non-convergence, 3 condition or inequality violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sublin/conditions.hpp"
#include "sublin/energy.hpp"
#include "sublin/estimates.hpp"
#include "sublin/io.hpp"
#include "sublin/kernels.hpp"
#include "sublin/potentials.hpp"
#include "sublin/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sublin;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const json& need(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("field '" + (ctx.empty() ? std::string("<root>") : ctx) + "' must be an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError("missing field '" + ctx + key + "'");
  return *it;
}

double need_number(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number()) throw ConfigError("field '" + ctx + key + "' must be a number");
  return v.get<double>();
}

int need_int(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_number_integer()) throw ConfigError("field '" + ctx + key + "' must be an integer");
  return v.get<int>();
}

std::string need_string(const json& j, const std::string& key, const std::string& ctx) {
  const json& v = need(j, key, ctx);
  if (!v.is_string()) throw ConfigError("field '" + ctx + key + "' must be a string");
  return v.get<std::string>();
}

struct Loaded {
  ProblemSpec problem;
  BoxGrid grid;
  double tol = 0.0;
  int max_iter = 0;
  fs::path out_dir;
};

Measure load_measure_field(const json& v, const std::string& field, int n, const fs::path& base) {
  Measure m;
  m.dim = n;
  if (v.is_null()) return m;
  if (!v.is_string()) throw ConfigError("field '" + field + "' must be a file path or null");
  fs::path p(v.get<std::string>());
  if (p.is_relative()) p = base / p;
  try {
    m = io::read_measure(p);
  } catch (const std::exception& e) {
    throw ConfigError("field '" + field + "': " + e.what());
  }
  if (m.dim != n) throw ConfigError("field '" + field + "': measure dimension differs from kernel n");
  return m;
}

Loaded load_config(const fs::path& cfg_path) {
  json j;
  try {
    j = json::parse(io::read_file(cfg_path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  const fs::path base = cfg_path.has_parent_path() ? cfg_path.parent_path() : fs::path(".");

  Loaded c;

  // Kernel: every mathematical parameter is written out, nothing is defaulted.
  const json& jk = need(j, "kernel", "");
  const std::string variant = need_string(jk, "variant", "kernel.");
  const int n = need_int(jk, "n", "kernel.");
  try {
    if (variant == "riesz") {
      const double alpha = need_number(jk, "alpha", "kernel.");
      Normalization norm = Normalization::classical;
      if (jk.contains("normalization")) {
        const std::string s = need_string(jk, "normalization", "kernel.");
        if (s == "unit") norm = Normalization::unit;
        else if (s == "classical") norm = Normalization::classical;
        else throw ConfigError("field 'kernel.normalization' must be unit or classical");
      }
      c.problem.kernel = make_riesz(n, alpha, norm);
    } else if (variant == "green_ball") {
      c.problem.kernel = make_green_ball(n, need_number(jk, "radius", "kernel."));
    } else if (variant == "green_half_space") {
      c.problem.kernel = make_green_half_space(n);
    } else {
      throw ConfigError("field 'kernel.variant' must be riesz, green_ball, or green_half_space");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("field 'kernel': ") + e.what());
  }

  // Grid: the layout every density must share; also the iteration grid when
  // the data is purely atomic.
  const json& jg = need(j, "grid", "");
  c.grid.dim = n;
  const json& jor = need(jg, "origin", "grid.");
  if (!jor.is_array() || static_cast<int>(jor.size()) != n)
    throw ConfigError("field 'grid.origin' must be an array of n numbers");
  for (int d = 0; d < n; ++d) {
    if (!jor[d].is_number()) throw ConfigError("field 'grid.origin' must be an array of n numbers");
    c.grid.origin[d] = jor[d].get<double>();
  }
  c.grid.spacing = need_number(jg, "spacing", "grid.");
  const json& jsh = need(jg, "shape", "grid.");
  if (!jsh.is_array() || static_cast<int>(jsh.size()) != n)
    throw ConfigError("field 'grid.shape' must be an array of n integers");
  for (int d = 0; d < n; ++d) {
    if (!jsh[d].is_number_integer()) throw ConfigError("field 'grid.shape' must be an array of n integers");
    c.grid.shape[d] = jsh[d].get<int>();
  }
  try {
    c.grid.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("field 'grid': ") + e.what());
  }

  const json& jt = need(j, "terms", "");
  if (!jt.is_array() || jt.empty()) throw ConfigError("field 'terms' must be a nonempty array");
  for (std::size_t i = 0; i < jt.size(); ++i) {
    const std::string ctx = "terms[" + std::to_string(i) + "].";
    ProblemTerm t;
    t.sigma = load_measure_field(need(jt[i], "sigma", ctx), ctx + "sigma", n, base);
    t.q = need_number(jt[i], "q", ctx);
    if (!(t.q > 0.0 && t.q < 1.0)) throw ConfigError("field '" + ctx + "q': q must lie in (0,1)");
    c.problem.terms.push_back(std::move(t));
  }

  c.problem.omega = load_measure_field(need(j, "omega", ""), "omega", n, base);
  c.problem.gamma = need_number(j, "gamma", "");
  if (!(c.problem.gamma > 0.0)) throw ConfigError("field 'gamma' must be positive");

  c.tol = need_number(j, "tol", "");
  if (!(c.tol > 0.0)) throw ConfigError("field 'tol' must be positive");
  c.max_iter = need_int(j, "max_iter", "");
  if (c.max_iter < 1) throw ConfigError("field 'max_iter' must be >= 1");
  fs::path od(need_string(j, "out_dir", ""));
  c.out_dir = od.is_relative() ? base / od : od;

  // Densities must live on the configured grid.
  bool any_density = false;
  for (std::size_t i = 0; i < c.problem.terms.size(); ++i) {
    const auto& d = c.problem.terms[i].sigma.density;
    if (!d) continue;
    any_density = true;
    if (!d->grid.same_layout(c.grid))
      throw ConfigError("field 'terms[" + std::to_string(i) + "].sigma': density layout differs from field 'grid'");
  }
  if (c.problem.omega.density) {
    any_density = true;
    if (!c.problem.omega.density->grid.same_layout(c.grid))
      throw ConfigError("field 'omega': density layout differs from field 'grid'");
  }
  // Purely atomic data: attach a zero density so the iteration has a grid;
  // the atoms keep carrying the mass exactly.
  if (!any_density) c.problem.omega.density = GridFunction(c.grid, 0.0);
  return c;
}

bool all_measures_zero(const ProblemSpec& p) {
  bool zero = p.omega.atoms.empty();
  if (p.omega.density)
    for (double v : p.omega.density->values) zero = zero && v == 0.0;
  for (const auto& t : p.terms) zero = zero && t.sigma.is_zero();
  return zero;
}

int cmd_solve(const fs::path& cfg) {
  const Loaded c = load_config(cfg);
  GridFunction u(c.grid, 0.0);
  solver::SolveReport rep;
  try {
    std::tie(u, rep) = solver::solve_minimal(c.problem, c.tol, c.max_iter);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  fs::create_directories(c.out_dir);
  io::write_grid_function(u, c.out_dir / "solution.grid");
  io::write_solve_report(rep, c.out_dir / "solve_report.txt");
  io::write_condition_report(conditions::evaluate_conditions(c.problem), c.out_dir / "condition_report.txt");
  std::cout << "solve: converged=" << (rep.converged ? 1 : 0) << " iterations=" << rep.iterate_count
            << " final_residual=" << io::fmt(rep.final_residual_fp) << " lorentz_norm=" << io::fmt(rep.lorentz_norm)
            << "\nartifacts: " << (c.out_dir / "solution.grid").string() << "\n";
  return rep.converged ? 0 : 2;
}

int cmd_check(const fs::path& cfg) {
  const Loaded c = load_config(cfg);
  fs::create_directories(c.out_dir);
  if (all_measures_zero(c.problem)) {
    conditions::ConditionReport rep;
    rep.sigma_integrals.assign(c.problem.terms.size(), 0.0);
    rep.cross_integrals.assign(c.problem.terms.size(), 0.0);
    io::write_condition_report(rep, c.out_dir / "condition_report.txt");
    std::cerr << "check: degenerate input, every measure is zero (nontriviality hypothesis fails)\n";
    return 3;
  }
  conditions::ConditionReport rep;
  try {
    rep = conditions::evaluate_conditions(c.problem);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  io::write_condition_report(rep, c.out_dir / "condition_report.txt");
  std::cout << "check: verdict=" << (rep.verdict ? 1 : 0);
  for (std::size_t i = 0; i < rep.sigma_integrals.size(); ++i)
    std::cout << " sigma_integral_" << (i + 1) << "=" << io::fmt(rep.sigma_integrals[i]);
  std::cout << " omega_integral=" << io::fmt(rep.omega_integral) << "\n";
  return rep.verdict ? 0 : 3;
}

// Probe locations for the bracket: cell centers (inside the kernel's domain
// when it has one) at least two cells away from every support point of the
// data, spread evenly through the eligible set.
std::vector<Point> build_probes(const Loaded& c) {
  std::vector<Point> support;
  auto add_measure = [&](const Measure& m) {
    for (const auto& a : m.atoms) support.push_back(a.loc);
    if (!m.density) return;
    for (std::size_t i = 0; i < m.density->size(); ++i)
      if ((*m.density)[i] > 0.0) support.push_back(m.density->grid.cell_center(i));
  };
  for (const auto& t : c.problem.terms) add_measure(t.sigma);
  add_measure(c.problem.omega);
  // Collar testing only needs coarse coverage of the support.
  const std::size_t stride = std::max<std::size_t>(1, support.size() / 2048);
  const double collar = 2.0 * c.grid.spacing;

  const auto* ball = std::get_if<GreenBall>(&c.problem.kernel.variant);
  const auto* half = std::get_if<GreenHalfSpace>(&c.problem.kernel.variant);
  std::vector<Point> eligible;
  for (std::size_t i = 0; i < c.grid.cell_count(); ++i) {
    const Point p = c.grid.cell_center(i);
    if (ball && dist(p, ball->center, c.grid.dim) >= ball->radius - collar) continue;
    if (half && p[c.grid.dim - 1] <= collar) continue;
    bool ok = true;
    for (std::size_t s = 0; s < support.size() && ok; s += stride)
      ok = dist(p, support[s], c.grid.dim) > collar;
    if (ok) eligible.push_back(p);
  }
  if (eligible.empty()) throw ConfigError("no probe locations remain outside the support collar");
  std::vector<Point> probes;
  const std::size_t want = std::min<std::size_t>(12, eligible.size());
  for (std::size_t k = 0; k < want; ++k) probes.push_back(eligible[k * (eligible.size() - 1) / std::max<std::size_t>(1, want - 1)]);
  return probes;
}

struct CheckTable {
  bool all_pass = true;
  void row(const std::string& name, bool pass, double value) {
    all_pass = all_pass && pass;
    std::cout << (pass ? "PASS " : "FAIL ") << name << " " << io::fmt(value) << "\n";
  }
};

void verify_estimates(const Loaded& c, const GridFunction& u, CheckTable& table) {
  if (!c.problem.kernel.is_riesz()) throw ConfigError("estimates verification requires a riesz kernel");
  if (c.problem.terms.size() != 1) throw ConfigError("estimates verification supports exactly one sigma term");
  const auto& term = c.problem.terms[0];

  const auto probes = build_probes(c);
  const auto br = estimates::bilateral_bracket(u, term.sigma, c.problem.omega, term.q, c.problem.kernel, probes, {},
                                               {}, 24, estimates::BracketConvention::minimal_solution);
  io::atomic_write(c.out_dir / "bracket_report.txt", io::render_bracket_report(br));
  if (br.degenerate) {
    table.row("bracket_degenerate_sigma_zero", true, 0.0);
  } else {
    table.row("bracket_lower_positive", br.c_low > 0.0, br.c_low);
    table.row("bracket_ordered", br.c_low <= br.c_up * (1.0 + 1e-9), br.c_up);
  }

  // Pointwise floor u >= (1-q)^{1/(1-q)} (G sigma)^{1/(1-q)}, a consequence of
  // u >= G(u^q sigma) alone, so it holds cell by cell in the discrete system.
  for (std::size_t i = 0; i < c.problem.terms.size(); ++i) {
    const auto& t = c.problem.terms[i];
    if (t.sigma.is_zero()) continue;
    const GridFunction pot = potentials::potential_grid_fft(c.problem.kernel, t.sigma);
    const double e = 1.0 / (1.0 - t.q);
    const double coef = std::pow(1.0 - t.q, e);
    double worst = 0.0;
    for (std::size_t l = 0; l < u.size(); ++l) {
      const double floor_l = coef * std::pow(pot[l], e);
      worst = std::min(worst, (u[l] - floor_l) / std::max(1.0, floor_l));
    }
    table.row("pointwise_lower_bound_" + std::to_string(i + 1), worst >= -1e-9, worst);
  }
}

void verify_energy(const Loaded& c, const GridFunction& u, int extension_factor, CheckTable& table) {
  energy::EnergyReport er;
  try {
    er = energy::energy_identity_check(c.problem, u, false, extension_factor);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  io::atomic_write(c.out_dir / "energy_report.txt", io::render_energy_report(er));
  table.row("energy_identity_gap", er.relative_gap <= 0.05, er.relative_gap);
}

void verify_kernel_axioms(const Loaded& c, CheckTable& table) {
  const KernelSpec& k = c.problem.kernel;
  const int n = c.grid.dim;
  Rng rng(4242);
  auto sample = [&]() {
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < n; ++d)
      p[d] = c.grid.origin[d] + rng.uniform(0.1, 0.9) * c.grid.spacing * c.grid.shape[d];
    if (const auto* b = std::get_if<GreenBall>(&k.variant)) {
      // Keep samples inside the ball: rescale toward the center.
      const double r = dist(p, b->center, n);
      if (r >= b->radius)
        for (int d = 0; d < n; ++d) p[d] = b->center[d] + (p[d] - b->center[d]) * 0.8 * b->radius / r;
    }
    if (std::holds_alternative<GreenHalfSpace>(k.variant) && p[n - 1] <= 0.0) p[n - 1] = std::abs(p[n - 1]) + 0.01;
    return p;
  };

  double worst_sym = 0.0;
  bool positive = true;
  for (int trial = 0; trial < 200; ++trial) {
    const Point x = sample(), y = sample();
    if (dist(x, y, n) < 1e-9) continue;
    const double kxy = kernels::kernel_eval(k, x, y), kyx = kernels::kernel_eval(k, y, x);
    positive = positive && kxy >= 0.0 && kyx >= 0.0;
    if (kxy == inf || kyx == inf) continue;
    worst_sym = std::max(worst_sym, std::abs(kxy - kyx) / (1.0 + std::max(kxy, kyx)));
  }
  table.row("kernel_symmetry", worst_sym <= 1e-12, worst_sym);
  table.row("kernel_nonnegative", positive, positive ? 0.0 : 1.0);

  const Point x0 = sample();
  table.row("kernel_diagonal_singular", kernels::kernel_eval(k, x0, x0) == inf, 0.0);

  if (k.is_riesz()) {
    // Homogeneity k(sx, sy) = s^{alpha-n} k(x, y).
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Point x = sample(), y = sample();
      if (dist(x, y, n) < 1e-9) continue;
      Point xs = x, ys = y;
      for (int d = 0; d < n; ++d) {
        xs[d] *= 2.0;
        ys[d] *= 2.0;
      }
      const double lhs = kernels::kernel_eval(k, xs, ys);
      const double rhs = std::pow(2.0, k.riesz().alpha - n) * kernels::kernel_eval(k, x, y);
      worst = std::max(worst, std::abs(lhs - rhs) / rhs);
    }
    table.row("riesz_homogeneity", worst <= 1e-12, worst);
  }
  if (const auto* b = std::get_if<GreenBall>(&k.variant)) {
    // The Green function vanishes when either argument reaches the sphere.
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Point x = sample();
      Point y = sample();
      double r = dist(y, b->center, n);
      if (r == 0.0) continue;
      for (int d = 0; d < n; ++d) y[d] = b->center[d] + (y[d] - b->center[d]) * b->radius / r;
      worst = std::max(worst, kernels::kernel_eval(k, x, y));
    }
    table.row("green_boundary_vanishing", worst <= 1e-12, worst);
  }
}

int cmd_verify(const fs::path& cfg, bool estimates_on, bool energy_on, bool axioms_on, int extension_factor) {
  const Loaded c = load_config(cfg);
  if (!fs::exists(c.out_dir / "solution.grid")) {
    std::cerr << "no solution artifact found in " << c.out_dir.string() << " (run solve first)\n";
    return 1;
  }
  if (energy_on && c.problem.gamma != 1.0) {
    std::cerr << "energy identity requires gamma = 1\n";
    return 1;
  }
  const GridFunction u = io::read_grid_function(c.out_dir / "solution.grid");
  if (!u.grid.same_layout(c.grid)) throw ConfigError("solution artifact layout differs from field 'grid'");

  CheckTable table;
  if (estimates_on) verify_estimates(c, u, table);
  if (energy_on) verify_energy(c, u, extension_factor, table);
  if (axioms_on) verify_kernel_axioms(c, table);
  std::cout << (table.all_pass ? "verify: all checks passed\n" : "verify: some checks failed\n");
  return table.all_pass ? 0 : 3;
}

int cmd_sweep(const fs::path& cfg, const std::string& param, const std::vector<double>& values) {
  if (values.empty()) {
    std::cerr << "sweep: field '--values' must list at least one value\n";
    return 1;
  }
  if (param != "gamma" && param != "q" && param != "alpha") {
    std::cerr << "sweep: field '--param' must be gamma, q, or alpha\n";
    return 1;
  }
  const Loaded c = load_config(cfg);
  if (param == "alpha" && !c.problem.kernel.is_riesz())
    throw ConfigError("sweep over alpha requires a riesz kernel");

  std::string csv = "param,value,r,rho,converged,final_residual,lorentz_norm,omega_integral";
  for (std::size_t i = 0; i < c.problem.terms.size(); ++i) {
    csv += ",sigma_integral_" + std::to_string(i + 1);
    csv += ",cross_integral_" + std::to_string(i + 1);
  }
  csv += "\n";

  for (double v : values) {
    ProblemSpec p = c.problem;
    try {
      if (param == "gamma") p.gamma = v;
      else if (param == "q")
        for (auto& t : p.terms) t.q = v;
      else
        p.kernel = make_riesz(c.grid.dim, v, c.problem.kernel.riesz().normalization);
      p.validate();
    } catch (const std::exception& e) {
      throw ConfigError("field '--values' entry " + io::fmt(v) + ": " + e.what());
    }
    const auto crep = conditions::evaluate_conditions(p);
    const auto [u, srep] = solver::solve_minimal(p, c.tol, c.max_iter);
    csv += param + "," + io::fmt(v) + "," + io::fmt(crep.solution.r) + "," + io::fmt(crep.solution.rho);
    csv += "," + std::to_string(srep.converged ? 1 : 0) + "," + io::fmt(srep.final_residual_fp);
    csv += "," + io::fmt(srep.lorentz_norm) + "," + io::fmt(crep.omega_integral);
    for (std::size_t i = 0; i < p.terms.size(); ++i) {
      csv += "," + io::fmt(crep.sigma_integrals[i]);
      csv += "," + io::fmt(crep.cross_integrals[i]);
    }
    csv += "\n";
  }
  fs::create_directories(c.out_dir);
  io::atomic_write(c.out_dir / "sweep.csv", csv);
  std::cout << "sweep: " << values.size() << " rows -> " << (c.out_dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sublinear integral equation toolkit"};
  app.require_subcommand(1);

  std::string cfg_solve, cfg_check, cfg_verify, cfg_sweep;
  auto* solve = app.add_subcommand("solve", "run the minimal-solution iteration and write artifacts");
  solve->add_option("config", cfg_solve, "configuration file")->required();
  auto* check = app.add_subcommand("check", "evaluate existence conditions and exponents");
  check->add_option("config", cfg_check, "configuration file")->required();

  bool f_estimates = false, f_energy = false, f_axioms = false;
  int extension_factor = 1;
  auto* verify = app.add_subcommand("verify", "verify inequalities against a prior solve");
  verify->add_option("config", cfg_verify, "configuration file")->required();
  verify->add_flag("--estimates", f_estimates, "bilateral bracket and pointwise bounds");
  verify->add_flag("--energy", f_energy, "energy identity (gamma = 1 only)");
  verify->add_flag("--kernel-axioms", f_axioms, "kernel symmetry/positivity/boundary checks");
  verify->add_option("--extension-factor", extension_factor, "domain enlargement for the energy identity")
      ->check(CLI::Range(1, 64));

  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "solve across a parameter range, emit CSV");
  sweep->add_option("config", cfg_sweep, "configuration file")->required();
  sweep->add_option("--param", param, "gamma, q, or alpha")->required();
  sweep->add_option("--values", values, "comma-separated parameter values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (solve->parsed()) return cmd_solve(cfg_solve);
    if (check->parsed()) return cmd_check(cfg_check);
    if (verify->parsed()) {
      if (!f_estimates && !f_energy && !f_axioms) {
        std::cerr << "verify: select at least one of --estimates, --energy, --kernel-axioms\n";
        return 1;
      }
      return cmd_verify(cfg_verify, f_estimates, f_energy, f_axioms, extension_factor);
    }
    if (sweep->parsed()) return cmd_sweep(cfg_sweep, param, values);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
