#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sublin/conditions.hpp"
#include "sublin/core.hpp"
#include "sublin/fftconv.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"
#include "sublin/potentials.hpp"

namespace sublin::solver {

inline constexpr double mono_eps = 1e-12;

struct SolveReport {
  int iterate_count = 0;
  std::vector<double> residual_history;  // sup |u_{j+1} - u_j| per step
  double final_residual_fp = inf;        // sup |u - T(u)| at the returned iterate
  int monotonicity_violations = 0;       // points where the expected direction failed beyond mono_eps
  std::vector<double> term_norms;        // L^{gamma+q_i}(d sigma_i) of the final iterate
  double lorentz_norm = 0.0;             // L^{r,rho} when the kernel order is known
  bool converged = false;
  bool conditions_ok = false;  // finiteness verdict (solver warns and proceeds when false)
  // Closed norm bound X <= (C1 M)^{1/(1-q_max)} + C2/(1-q_max); C1 is fitted
  // from the iterate recursion X_{j+1} <= C1 M X_j^{q_max} + C2 and labeled so.
  double c1_fitted = 0.0;
  double c2 = 0.0;
  double q_max = 0.0;
  double norm_bound = inf;
};

namespace detail {

inline bool in_domain(const KernelSpec& k, const Point& p) {
  if (const auto* b = std::get_if<GreenBall>(&k.variant))
    return dist(p, b->center, b->dim) < b->radius * (1.0 - 1e-12);
  if (const auto* h = std::get_if<GreenHalfSpace>(&k.variant)) return p[h->dim - 1] > 0.0;
  return true;
}

inline double pow_ext(double v, double e) { return v == inf ? inf : std::pow(v, e); }

}  // namespace detail

// Applies T(u) = sum_i G(u^{q_i} d sigma_i) + G omega. State lives on one
// common grid for Riesz/Green kernels; for MatrixKernel the "grid" is a
// positional container of length = point count (geometry unused). Kernel
// tables, Green matrices, and G omega are precomputed at construction, so a
// long monotone iteration pays matvec/FFT cost only.
class Iterator {
 public:
  explicit Iterator(const ProblemSpec& p) : p_(p) {
    p_.validate();
    if (const auto* mk = std::get_if<MatrixKernel>(&p_.kernel.variant)) {
      build_matrix_state(*mk);
      return;
    }
    // Common grid comes from the first density among terms, else from omega.
    const GridFunction* ref = nullptr;
    for (const auto& t : p_.terms)
      if (t.sigma.density) ref = &*t.sigma.density;
    if (!ref && p_.omega.density) ref = &*p_.omega.density;
    if (!ref) throw std::invalid_argument("Iterator: no grid density anywhere; grid unknown");
    grid_ = ref->grid;
    for (const auto& t : p_.terms) {
      if (t.sigma.has_atoms()) throw std::invalid_argument("Iterator: atomic sigma_i rejected for singular kernels");
      if (t.sigma.density && !t.sigma.density->grid.same_layout(grid_))
        throw std::invalid_argument("Iterator: all densities must share one grid layout");
    }
    if (p_.omega.density && !p_.omega.density->grid.same_layout(grid_))
      throw std::invalid_argument("Iterator: all densities must share one grid layout");

    active_.assign(grid_.cell_count(), 1);
    if (!p_.kernel.is_riesz()) {
      for (std::size_t i = 0; i < active_.size(); ++i)
        active_[i] = detail::in_domain(p_.kernel, grid_.cell_center(i)) ? 1 : 0;
      for (const auto& t : p_.terms)
        if (t.sigma.density)
          for (std::size_t i = 0; i < active_.size(); ++i)
            if (!active_[i] && (*t.sigma.density)[i] > 0.0)
              throw std::invalid_argument("Iterator: sigma support outside the kernel domain");
      build_green_matrices();
    } else {
      plan_ = std::make_unique<fft::ConvolutionPlan>(grid_.shape, grid_.dim, [&](const std::array<int, 3>& off) {
        return grid_.cell_volume() * potentials::offset_kernel_weight(p_.kernel, off, grid_.spacing);
      });
    }
    build_g_omega();
  }

  const BoxGrid& grid() const { return grid_; }
  const GridFunction& g_omega() const { return *g_omega_; }
  const std::vector<char>& active() const { return active_; }
  // Cells where G omega is infinite (omega atoms on cell centers) are excluded
  // from residual and monotonicity checks.
  bool excluded(std::size_t i) const { return !active_[i] || (*g_omega_)[i] == inf; }

  GridFunction apply(const GridFunction& u) const {
    if (!u.grid.same_layout(grid_)) throw std::invalid_argument("Iterator::apply: state grid mismatch");
    GridFunction out = *g_omega_;
    for (std::size_t ti = 0; ti < p_.terms.size(); ++ti) {
      const auto& t = p_.terms[ti];
      if (t.sigma.is_zero()) continue;
      if (const auto* mk = std::get_if<MatrixKernel>(&p_.kernel.variant)) {
        apply_matrix_term(*mk, ti, u, out);
        continue;
      }
      const auto& dens = t.sigma.density->values;
      std::vector<double> w(dens.size(), 0.0);
      for (std::size_t i = 0; i < dens.size(); ++i) {
        if (dens[i] == 0.0) continue;
        const double uv = detail::pow_ext(u[i], t.q);
        if (uv == inf) throw std::runtime_error("Iterator::apply: infinite iterate inside a sigma integral (degenerate instance)");
        w[i] = dens[i] * uv;
      }
      if (plan_) {
        const auto field = plan_->apply(w);
        for (std::size_t i = 0; i < out.size(); ++i)
          if (out[i] != inf) out[i] += field[i];
      } else {
        const auto& mat = green_mats_[ti];  // rows: active targets, cols: support cells of term ti
        const auto& cols = green_cols_[ti];
        std::vector<double> wc(cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c) wc[c] = w[cols[c]];
        for (std::size_t r = 0; r < green_rows_.size(); ++r) {
          double s = 0.0;
          const double* row = mat.data() + r * cols.size();
          for (std::size_t c = 0; c < cols.size(); ++c) s += row[c] * wc[c];
          const std::size_t i = green_rows_[r];
          if (out[i] != inf) out[i] += s;
        }
      }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
      if (std::isnan(out[i])) throw std::runtime_error("Iterator::apply: NaN produced");
    return out;
  }

  // G sigma_i on the state layout, for starts and Thm 2.5 checks.
  GridFunction g_sigma(std::size_t term) const {
    const auto& t = p_.terms.at(term);
    GridFunction out(grid_, 0.0);
    if (t.sigma.is_zero()) return out;
    if (std::holds_alternative<MatrixKernel>(p_.kernel.variant)) {
      const auto& mk = std::get<MatrixKernel>(p_.kernel.variant);
      for (std::size_t i = 0; i < mk.points.size(); ++i)
        out[i] = potentials::potential_values(p_.kernel, t.sigma, {mk.points[i]})[0];
      return out;
    }
    if (plan_) {
      out.values = plan_->apply(t.sigma.density->values);
      return out;
    }
    const auto& mat = green_mats_[term];
    const auto& cols = green_cols_[term];
    const auto& dens = t.sigma.density->values;
    for (std::size_t r = 0; r < green_rows_.size(); ++r) {
      double s = 0.0;
      const double* row = mat.data() + r * cols.size();
      for (std::size_t c = 0; c < cols.size(); ++c) s += row[c] * dens[cols[c]];
      out[green_rows_[r]] = s;
    }
    return out;
  }

  const ProblemSpec& problem() const { return p_; }

 private:
  void build_matrix_state(const MatrixKernel& mk) {
    grid_ = BoxGrid{};
    grid_.dim = 2;
    grid_.spacing = 1.0;
    grid_.shape = {static_cast<int>(mk.points.size()), 1, 1};
    active_.assign(mk.points.size(), 1);
    for (const auto& t : p_.terms) {
      if (t.sigma.density) throw std::invalid_argument("Iterator: MatrixKernel carries no density measures");
      for (const auto& a : t.sigma.atoms) mk.index_of(a.loc);  // must sit on kernel points
    }
    if (p_.omega.density) throw std::invalid_argument("Iterator: MatrixKernel carries no density measures");
    build_g_omega();
  }

  void apply_matrix_term(const MatrixKernel& mk, std::size_t ti, const GridFunction& u, GridFunction& out) const {
    const auto& t = p_.terms[ti];
    for (const auto& a : t.sigma.atoms) {
      if (a.mass == 0.0) continue;
      const std::size_t src = mk.index_of(a.loc);
      const double uv = detail::pow_ext(u[src], t.q);
      if (uv == inf) throw std::runtime_error("Iterator::apply: infinite iterate inside a sigma integral (degenerate instance)");
      for (std::size_t i = 0; i < mk.points.size(); ++i) out[i] += a.mass * uv * mk.at(i, src);
    }
  }

  void build_green_matrices() {
    green_rows_.clear();
    for (std::size_t i = 0; i < active_.size(); ++i)
      if (active_[i]) green_rows_.push_back(i);
    green_mats_.resize(p_.terms.size());
    green_cols_.resize(p_.terms.size());
    for (std::size_t ti = 0; ti < p_.terms.size(); ++ti) {
      const auto& t = p_.terms[ti];
      if (t.sigma.is_zero()) continue;
      auto& cols = green_cols_[ti];
      const auto& dens = t.sigma.density->values;
      for (std::size_t i = 0; i < dens.size(); ++i)
        if (dens[i] > 0.0) cols.push_back(i);
      auto& mat = green_mats_[ti];
      mat.resize(green_rows_.size() * cols.size());
      const double vol = grid_.cell_volume();
      for (std::size_t r = 0; r < green_rows_.size(); ++r) {
        const Point x = grid_.cell_center(green_rows_[r]);
        for (std::size_t c = 0; c < cols.size(); ++c)
          mat[r * cols.size() + c] = vol * potentials::cell_kernel_weight(p_.kernel, x, grid_.cell_center(cols[c]), grid_.spacing);
      }
    }
  }

  void build_g_omega() {
    g_omega_.emplace(grid_, 0.0);
    if (p_.omega.is_zero()) return;
    if (std::holds_alternative<MatrixKernel>(p_.kernel.variant)) {
      const auto& mk = std::get<MatrixKernel>(p_.kernel.variant);
      for (std::size_t i = 0; i < mk.points.size(); ++i)
        (*g_omega_)[i] = potentials::potential_values(p_.kernel, p_.omega, {mk.points[i]})[0];
      return;
    }
    if (plan_ && p_.omega.density && !p_.omega.has_atoms()) {
      g_omega_->values = plan_->apply(p_.omega.density->values);
      return;
    }
    if (plan_) {
      if (p_.omega.density) {
        *g_omega_ = potentials::potential_grid_fft(p_.kernel, p_.omega);
        return;
      }
      // Atoms only: direct kernel sums. An atom on a cell center keeps the
      // genuine +inf there; apply() excludes such cells from the iteration.
      for (const auto& a : p_.omega.atoms) {
        if (a.mass == 0.0) continue;
        for (std::size_t i = 0; i < g_omega_->size(); ++i) {
          const double kv = kernels::kernel_eval(p_.kernel, grid_.cell_center(i), a.loc);
          (*g_omega_)[i] = (kv == inf) ? inf : (*g_omega_)[i] + a.mass * kv;
        }
      }
      return;
    }
    // Green kernel: direct evaluation at active cells only.
    std::vector<Point> targets;
    for (std::size_t r : green_rows_) targets.push_back(grid_.cell_center(r));
    const auto vals = potentials::potential_values(p_.kernel, p_.omega, targets);
    for (std::size_t r = 0; r < green_rows_.size(); ++r) (*g_omega_)[green_rows_[r]] = vals[r];
  }

  ProblemSpec p_;
  BoxGrid grid_;
  std::vector<char> active_;
  std::unique_ptr<fft::ConvolutionPlan> plan_;
  std::vector<std::vector<double>> green_mats_;
  std::vector<std::vector<std::size_t>> green_cols_;
  std::vector<std::size_t> green_rows_;
  std::optional<GridFunction> g_omega_;
};

inline GridFunction iterate_once(const ProblemSpec& p, const GridFunction& u) { return Iterator(p).apply(u); }

inline double residual(const ProblemSpec& p, const GridFunction& u) {
  Iterator it(p);
  const GridFunction tu = it.apply(u);
  double r = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (it.excluded(i)) continue;
    r = std::max(r, std::abs(u[i] - tu[i]));
  }
  return r;
}

// Per-term subsolution starts u_i^{(0)} = kappa_i (G sigma_i)^{1/(1-q_i)}.
// The proof's uniform kappa must satisfy kappa <= (1/c_i)^{1/(1-q_i)} for
// every term (c_i = a_i h^{a_i-1}, a_i = 1/(1-q_i)) and kappa <= C~(q_i) from
// the pointwise lower bound; both bounds are decreasing in q_i, so the
// largest exponent binds. We take the per-term minimum, which equals that
// uniform constant evaluated at max q_i.
inline double start_kappa(const ProblemSpec& p) {
  const double h = p.kernel.wmp_h;
  double kap = inf;
  for (const auto& t : p.terms) {
    const double a = 1.0 / (1.0 - t.q);
    const double c = a * std::pow(h, a - 1.0);
    const double from_iterated = std::pow(1.0 / c, 1.0 / (1.0 - t.q));
    const double cthm = std::pow(1.0 - t.q, 1.0 / (1.0 - t.q)) * std::pow(h, -t.q / (1.0 - t.q));
    kap = std::min({kap, from_iterated, cthm});
  }
  if (!(kap > 0.0)) throw std::logic_error("start_kappa: nonpositive kappa");
  return kap;
}

inline std::vector<GridFunction> initial_lower(const ProblemSpec& p) {
  Iterator it(p);
  const double kap = start_kappa(p);
  std::vector<GridFunction> out;
  for (std::size_t ti = 0; ti < p.terms.size(); ++ti) {
    GridFunction g = it.g_sigma(ti);
    const double e = 1.0 / (1.0 - p.terms[ti].q);
    for (auto& v : g.values) v = kap * detail::pow_ext(v, e);
    out.push_back(std::move(g));
  }
  return out;
}

namespace detail {

inline void record_norms(const Iterator& it, const GridFunction& u, SolveReport& rep) {
  const auto& p = it.problem();
  rep.term_norms.clear();
  for (const auto& t : p.terms)
    rep.term_norms.push_back(t.sigma.is_zero() ? 0.0 : lorentz::lp_norm_measure(u, p.gamma + t.q, t.sigma));
  double alpha = 0.0;
  if (p.kernel.is_riesz()) alpha = p.kernel.riesz().alpha;
  else if (!std::holds_alternative<MatrixKernel>(p.kernel.variant)) alpha = 2.0;
  if (alpha > 0.0 && alpha < p.kernel.dim()) {
    bool finite = true;
    for (double v : u.values) finite = finite && v != inf;
    if (finite) rep.lorentz_norm = lorentz::lorentz_norm(u, conditions::solution_exponents(p.gamma, alpha, p.kernel.dim()));
  }
}

inline double sup_diff(const Iterator& it, const GridFunction& a, const GridFunction& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (it.excluded(i)) continue;
    r = std::max(r, std::abs(a[i] - b[i]));
  }
  return r;
}

}  // namespace detail

inline std::pair<GridFunction, SolveReport> solve_minimal(const ProblemSpec& p, double tol, int max_iter) {
  Iterator it(p);
  SolveReport rep;
  rep.conditions_ok = conditions::evaluate_conditions(p).verdict;

  // u_0 = sum_i G((u_i^{(0)})^{q_i} d sigma_i) + G omega. Each term uses its
  // own start u_i^{(0)}, so the terms are applied one at a time and summed.
  const auto starts = initial_lower(p);
  GridFunction u = it.g_omega();
  for (std::size_t ti = 0; ti < p.terms.size(); ++ti) {
    if (p.terms[ti].sigma.is_zero()) continue;
    ProblemSpec single = p;
    single.terms = {p.terms[ti]};
    single.omega = Measure{};
    single.omega.dim = p.kernel.dim();
    const GridFunction contrib = Iterator(single).apply(starts[ti]);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (u[i] != inf) u[i] += contrib[i];
  }

  rep.q_max = 0.0;
  for (const auto& t : p.terms) rep.q_max = std::max(rep.q_max, t.q);
  rep.c2 = 0.0;
  for (const auto& t : p.terms)
    if (!t.sigma.is_zero() && !p.omega.is_zero())
      rep.c2 = std::max(rep.c2, lorentz::lp_norm_measure(it.g_omega(), p.gamma + t.q, t.sigma));

  const std::size_t m_terms = p.terms.size();
  auto max_term_norm = [&](const GridFunction& w) {
    double x = 0.0;
    for (const auto& t : p.terms)
      if (!t.sigma.is_zero()) x = std::max(x, lorentz::lp_norm_measure(w, p.gamma + t.q, t.sigma));
    return x;
  };
  double x_prev = max_term_norm(u);

  for (int j = 0; j < max_iter; ++j) {
    GridFunction next = it.apply(u);
    const double diff = detail::sup_diff(it, next, u);
    rep.residual_history.push_back(diff);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (it.excluded(i)) continue;
      if (next[i] < u[i] - mono_eps) ++rep.monotonicity_violations;
    }
    const double x_next = max_term_norm(next);
    if (x_prev > 0.0 && x_next > rep.c2)
      rep.c1_fitted = std::max(rep.c1_fitted, (x_next - rep.c2) / (m_terms * std::pow(x_prev, rep.q_max)));
    x_prev = x_next;
    u = std::move(next);
    ++rep.iterate_count;
    if (diff <= tol) {
      rep.converged = true;
      break;
    }
  }

  rep.final_residual_fp = detail::sup_diff(it, it.apply(u), u);
  detail::record_norms(it, u, rep);
  if (rep.c1_fitted > 0.0 && rep.q_max < 1.0)
    rep.norm_bound = std::pow(rep.c1_fitted * m_terms, 1.0 / (1.0 - rep.q_max)) + rep.c2 / (1.0 - rep.q_max);
  return {std::move(u), std::move(rep)};
}

inline std::pair<GridFunction, SolveReport> downward_solve(const ProblemSpec& p, const GridFunction& start,
                                                           double tol, int max_iter) {
  Iterator it(p);
  SolveReport rep;
  rep.conditions_ok = true;  // caller ran the upward solve already
  {
    const GridFunction t0 = it.apply(start);
    for (std::size_t i = 0; i < start.size(); ++i) {
      if (it.excluded(i)) continue;
      if (start[i] < t0[i] - tol) throw std::invalid_argument("downward_solve: start is not a numerical supersolution");
    }
  }
  GridFunction v = start;
  for (int j = 0; j < max_iter; ++j) {
    GridFunction next = it.apply(v);
    const double diff = detail::sup_diff(it, next, v);
    rep.residual_history.push_back(diff);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (it.excluded(i)) continue;
      if (next[i] > v[i] + mono_eps) ++rep.monotonicity_violations;  // downward run must not increase
    }
    v = std::move(next);
    ++rep.iterate_count;
    if (diff <= tol) {
      rep.converged = true;
      break;
    }
  }
  rep.final_residual_fp = detail::sup_diff(it, it.apply(v), v);
  rep.q_max = 0.0;
  for (const auto& t : p.terms) rep.q_max = std::max(rep.q_max, t.q);
  detail::record_norms(it, v, rep);
  return {std::move(v), std::move(rep)};
}

// Max relative violation of the pointwise lower bound
// u >= (1-q_i)^{1/(1-q_i)} h^{-q_i/(1-q_i)} (G sigma_i)^{1/(1-q_i)}.
inline double pointwise_lower_violation(const ProblemSpec& p, const GridFunction& u) {
  Iterator it(p);
  const double h = p.kernel.wmp_h;
  double worst = 0.0;
  for (std::size_t ti = 0; ti < p.terms.size(); ++ti) {
    const double q = p.terms[ti].q;
    const double ct = std::pow(1.0 - q, 1.0 / (1.0 - q)) * std::pow(h, -q / (1.0 - q));
    const GridFunction gs = it.g_sigma(ti);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (it.excluded(i)) continue;
      const double bound = ct * detail::pow_ext(gs[i], 1.0 / (1.0 - q));
      if (bound > 0.0 && bound != inf) worst = std::max(worst, (bound - u[i]) / bound);
    }
  }
  return worst;
}

// Young-step identity behind the closed norm bound: a b <= (1-q) a^{1/(1-q)} + q b^{1/q}.
inline double young_gap(double a, double b, double q) {
  return (1.0 - q) * std::pow(a, 1.0 / (1.0 - q)) + q * std::pow(b, 1.0 / q) - a * b;
}

}  // namespace sublin::solver
