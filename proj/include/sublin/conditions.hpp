#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sublin/core.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"
#include "sublin/potentials.hpp"
#include "sublin/rational.hpp"

namespace sublin::conditions {

inline constexpr std::uint64_t default_audit_seed = 20240917ull;

namespace detail {

struct WeightedValues {
  std::vector<double> weights;  // atom masses, then density * cell_volume, positive entries only
  std::vector<double> values;   // potential of `source` at the matching support point of `target`
};

// Potential of `source` sampled on the support of `target`. When both
// measures are densities on one grid and the kernel is Riesz, the values come
// from the FFT path; otherwise each support point is evaluated directly.
inline WeightedValues potential_on_measure(const KernelSpec& k, const Measure& source, const Measure& target) {
  WeightedValues wv;
  std::vector<Point> atom_pts;
  for (const auto& a : target.atoms)
    if (a.mass > 0.0) {
      wv.weights.push_back(a.mass);
      atom_pts.push_back(a.loc);
    }
  wv.values = potentials::potential_values(k, source, atom_pts);

  if (target.density) {
    const auto& d = *target.density;
    const double vol = d.grid.cell_volume();
    const bool fast = k.is_riesz() && source.density && source.density->grid.same_layout(d.grid);
    if (fast) {
      const GridFunction pg = potentials::potential_grid_fft(k, source);
      for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) {
          wv.weights.push_back(d[i] * vol);
          wv.values.push_back(pg[i]);
        }
    } else {
      std::vector<Point> centers;
      std::vector<double> ws;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) {
          ws.push_back(d[i] * vol);
          centers.push_back(d.grid.cell_center(i));
        }
      const auto vals = potentials::potential_values(k, source, centers);
      wv.weights.insert(wv.weights.end(), ws.begin(), ws.end());
      wv.values.insert(wv.values.end(), vals.begin(), vals.end());
    }
  }
  return wv;
}

inline double power_integral(const WeightedValues& wv, double e) {
  double acc = 0.0;
  for (std::size_t i = 0; i < wv.values.size(); ++i) {
    if (wv.values[i] == inf) return inf;
    acc += wv.weights[i] * std::pow(wv.values[i], e);
  }
  return acc;
}

inline GridFunction potential_grid(const KernelSpec& k, const Measure& m) {
  if (k.is_riesz()) return potentials::potential_grid_fft(k, m);
  return potentials::potential_on_grid_direct(k, m);
}

}  // namespace detail

// int (G sigma)^{(gamma+q)/(1-q)} d sigma. Atoms make this diverge for every
// singular kernel, so they are rejected; the finite MatrixKernel diagonal is
// the one case where atomic sigma keeps the integral finite.
inline double sigma_energy(const Measure& sigma, double q, double gamma, const KernelSpec& k) {
  if (!(gamma > 0.0) || !(q < 1.0) || !(gamma + q > 0.0))
    throw std::invalid_argument("sigma_energy: need gamma > 0 and -gamma < q < 1");
  if (sigma.has_atoms() && !std::holds_alternative<MatrixKernel>(k.variant))
    throw std::invalid_argument("sigma_energy: atomic sigma rejected (self-energy diverges for singular kernels)");
  if (sigma.is_zero()) return 0.0;
  const double e = (gamma + q) / (1.0 - q);
  return detail::power_integral(detail::potential_on_measure(k, sigma, sigma), e);
}

// int (G omega)^{gamma} d omega; gamma = 1 is the dual energy. Atomic omega
// yields +infinity (the potential blows up at its own atoms), which reports
// the genuine failure of the finiteness condition rather than an error.
inline double omega_energy(const Measure& omega, double gamma, const KernelSpec& k) {
  if (!(gamma > 0.0)) throw std::invalid_argument("omega_energy: gamma must be positive");
  if (omega.is_zero()) return 0.0;
  if (omega.has_atoms() && !std::holds_alternative<MatrixKernel>(k.variant)) return inf;
  return detail::power_integral(detail::potential_on_measure(k, omega, omega), gamma);
}

struct TwoWeightReport {
  double lhs = 0.0;          // int (G omega)^{gamma+q} d sigma
  double rhs_product = 0.0;  // [int (G omega)^gamma d omega]^{(gamma+q)/(gamma+1)} * [int (G sigma)^{(gamma+q)/(1-q)} d sigma]^{(1-q)/(gamma+1)}
  double ratio = 0.0;
  bool degenerate = false;  // rhs vanished while lhs did not
};

inline TwoWeightReport two_weight_check(const Measure& sigma, const Measure& omega, double q, double gamma,
                                        const KernelSpec& k) {
  if (!(gamma > 0.0) || !(q > -gamma && q < 1.0))
    throw std::invalid_argument("two_weight_check: need gamma > 0 and -gamma < q < 1");
  TwoWeightReport rep;
  rep.lhs = detail::power_integral(detail::potential_on_measure(k, omega, sigma), gamma + q);
  const double a = omega_energy(omega, gamma, k);
  const double b = sigma_energy(sigma, q, gamma, k);
  rep.rhs_product = std::pow(a, (gamma + q) / (gamma + 1.0)) * std::pow(b, (1.0 - q) / (gamma + 1.0));
  if (rep.rhs_product > 0.0) {
    rep.ratio = rep.lhs / rep.rhs_product;
  } else if (rep.lhs > 0.0) {
    rep.degenerate = true;
    rep.ratio = inf;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Exponent formulas, in doubles and in exact rationals.

inline LorentzPair solution_exponents(double gamma, double alpha, int n) {
  if (!(gamma > 0.0) || !(alpha > 0.0 && alpha < n)) throw std::invalid_argument("solution_exponents: need gamma > 0, 0 < alpha < n");
  return {n * (gamma + 1.0) / (n - alpha), gamma + 1.0};
}

inline std::pair<Rational, Rational> solution_exponents_rational(const Rational& gamma, const Rational& alpha, int n) {
  const Rational one(1);
  return {Rational(n) * (gamma + one) / (Rational(n) - alpha), gamma + one};
}

struct SufficientExponents {
  std::vector<LorentzPair> terms;  // (s_i, t_i) per q_i
  LorentzPair omega{1.0, 1.0};     // (s-tilde, t-tilde)
};

inline SufficientExponents sufficient_exponents(double gamma, const std::vector<double>& qs, double alpha, int n) {
  if (!(gamma > 0.0) || !(alpha > 0.0 && alpha < n)) throw std::invalid_argument("sufficient_exponents: need gamma > 0, 0 < alpha < n");
  SufficientExponents se;
  for (double q : qs) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("sufficient_exponents: q must lie in (0,1)");
    se.terms.push_back({n * (gamma + 1.0) / (n * (1.0 - q) + alpha * (gamma + q)), (gamma + 1.0) / (1.0 - q)});
  }
  se.omega = {n * (gamma + 1.0) / (n + alpha * gamma), gamma + 1.0};
  return se;
}

inline std::pair<Rational, Rational> sufficient_term_exponents_rational(const Rational& gamma, const Rational& q,
                                                                        const Rational& alpha, int n) {
  const Rational one(1), nn(n);
  return {nn * (gamma + one) / (nn * (one - q) + alpha * (gamma + q)), (gamma + one) / (one - q)};
}

inline std::pair<Rational, Rational> sufficient_omega_exponents_rational(const Rational& gamma, const Rational& alpha,
                                                                         int n) {
  const Rational one(1), nn(n);
  return {nn * (gamma + one) / (nn + alpha * gamma), gamma + one};
}

// Laplacian-case exponents written from their own displays, so agreement with
// the alpha = 2 specialization above is a genuine cross-check.
inline std::pair<Rational, Rational> green_term_exponents_rational(const Rational& gamma, const Rational& q, int n) {
  const Rational one(1), two(2), nn(n);
  return {nn * (gamma + one) / (nn * (one - q) + two * (gamma + q)), (gamma + one) / (one - q)};
}

inline std::pair<Rational, Rational> green_omega_exponents_rational(const Rational& gamma, int n) {
  const Rational one(1), two(2), nn(n);
  return {nn * (gamma + one) / (nn + two * gamma), gamma + one};
}

// ---------------------------------------------------------------------------
// Randomized audits. Trial 0 is always f = 1 so the constant-function
// closed form is part of every audit; the seed is fixed for reproducibility.

namespace detail {

inline GridFunction random_on_support(const GridFunction& density, Rng& rng) {
  GridFunction f(density.grid, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i)
    if (density[i] > 0.0) f[i] = rng.uniform();
  return f;
}

}  // namespace detail

// Max over trials of || G(f d sigma) ||_{L^{gamma+q}(d sigma)} / || f ||_{L^{(gamma+q)/q}(d sigma)}.
inline double weighted_norm_audit(const Measure& sigma, double q, double gamma, const KernelSpec& k, int trials,
                                  std::uint64_t seed = default_audit_seed) {
  if (!sigma.density) throw std::invalid_argument("weighted_norm_audit: density sigma required");
  if (sigma.is_zero()) return 0.0;
  const auto& dens = *sigma.density;
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    GridFunction f = (t == 0) ? GridFunction(dens.grid, 1.0) : detail::random_on_support(dens, rng);
    Measure fd;
    fd.dim = sigma.dim;
    fd.density = GridFunction(dens.grid, 0.0);
    for (std::size_t i = 0; i < dens.size(); ++i) fd.density->values[i] = f[i] * dens[i];
    const GridFunction pot = detail::potential_grid(k, fd);
    const double num = lorentz::lp_norm_measure(pot, gamma + q, sigma);
    const double den = lorentz::lp_norm_measure(f, (gamma + q) / q, sigma);
    if (den > 0.0) worst = std::max(worst, num / den);
  }
  return worst;
}

// Max over trials of || G(f d sigma) ||_{L^{r,rho}} / ( || G sigma ||^{1/s'}_{L^{r/(1-q),rho/(1-q)}} || f ||_{L^s(d sigma)} )
// with s = (r(n-alpha) - n(1-q)) / (n q).
inline double lorentz_weighted_audit(const Measure& sigma, double q, const LorentzPair& pair, const KernelSpec& k,
                                     int trials, std::uint64_t seed = default_audit_seed) {
  if (!sigma.density) throw std::invalid_argument("lorentz_weighted_audit: density sigma required");
  const int n = k.dim();
  const double alpha = k.riesz().alpha;
  if (!(pair.r > n / (n - alpha))) throw std::invalid_argument("lorentz_weighted_audit: requires r > n/(n-alpha)");
  const double s = (pair.r * (n - alpha) - n * (1.0 - q)) / (n * q);
  if (!(s > 1.0)) throw std::invalid_argument("lorentz_weighted_audit: exponent s <= 1, hypothesis violated");
  const double sprime = s / (s - 1.0);

  const GridFunction gsig = detail::potential_grid(k, sigma);
  const double gsig_norm = lorentz::lorentz_norm(gsig, {pair.r / (1.0 - q), pair.rho / (1.0 - q)});

  const auto& dens = *sigma.density;
  Rng rng(seed);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    GridFunction f = (t == 0) ? GridFunction(dens.grid, 1.0) : detail::random_on_support(dens, rng);
    Measure fd;
    fd.dim = sigma.dim;
    fd.density = GridFunction(dens.grid, 0.0);
    for (std::size_t i = 0; i < dens.size(); ++i) fd.density->values[i] = f[i] * dens[i];
    const double num = lorentz::lorentz_norm(detail::potential_grid(k, fd), pair);
    const double den = std::pow(gsig_norm, 1.0 / sprime) * lorentz::lp_norm_measure(f, s, sigma);
    if (den > 0.0) worst = std::max(worst, num / den);
  }
  return worst;
}

// int (G omega)^beta d omega against its Lorentz-Hoelder majorant. The
// pairing bounds the integral by ||(G omega)^beta||_{L^{s',t'}} * ||omega||_{L^{s,t}},
// and ||(g)^beta||_{L^{s',t'}} = ||g||^beta_{L^{beta s', beta t'}} identically
// on rearrangements; the unpowered product is reported alongside for
// reference, but only `product` is an actual bound when beta != 1.
struct Prop36Report {
  double lhs = 0.0;
  double product = 0.0;          // ||G omega||^beta_{L^{beta s', beta t'}} * ||omega||_{L^{s,t}}
  double display_product = 0.0;  // ||G omega||_{L^{beta s', beta t'}} * ||omega||_{L^{s,t}}
  LorentzPair st{1.0, 1.0};      // (s, t) = (n(beta+1)/(n+alpha beta), beta+1)
  LorentzPair dual{1.0, 1.0};    // (beta s', beta t')
};

inline Prop36Report prop36_check(const GridFunction& omega_density, double beta, double alpha, int n,
                                 const KernelSpec& k) {
  if (!(beta > 0.0)) throw std::invalid_argument("prop36_check: beta must be positive");
  Prop36Report rep;
  rep.st = {n * (beta + 1.0) / (n + alpha * beta), beta + 1.0};
  const double sp = rep.st.r / (rep.st.r - 1.0);
  const double tp = rep.st.rho / (rep.st.rho - 1.0);
  rep.dual = {beta * sp, beta * tp};

  Measure om;
  om.dim = n;
  om.density = omega_density;
  if (om.is_zero()) return rep;
  const GridFunction g = detail::potential_grid(k, om);
  GridFunction gb = g;
  for (auto& v : gb.values) v = std::pow(v, beta);
  rep.lhs = lorentz::integrate_against(gb, om);
  const double gnorm = lorentz::lorentz_norm(g, rep.dual);
  const double onorm = lorentz::lorentz_norm(omega_density, rep.st);
  rep.product = std::pow(gnorm, beta) * onorm;
  rep.display_product = gnorm * onorm;
  return rep;
}

// ---------------------------------------------------------------------------
// Full condition report for a problem.

struct ConditionReport {
  std::vector<double> sigma_integrals;  // int (G sigma_i)^{(gamma+q_i)/(1-q_i)} d sigma_i
  double omega_integral = 0.0;          // int (G omega)^gamma d omega
  std::vector<double> cross_integrals;  // int (G omega)^{gamma+q_i} d sigma_i
  bool verdict = false;                 // every integral finite
  LorentzPair solution{1.0, 1.0};
  std::vector<LorentzPair> sufficient_terms;
  LorentzPair sufficient_omega{1.0, 1.0};
  bool exponents_valid = false;  // set for Riesz and Green kernels (alpha known)
};

inline ConditionReport evaluate_conditions(const ProblemSpec& p) {
  p.validate();
  ConditionReport rep;
  bool finite = true;
  for (const auto& term : p.terms) {
    const double se = term.sigma.is_zero() ? 0.0 : sigma_energy(term.sigma, term.q, p.gamma, p.kernel);
    rep.sigma_integrals.push_back(se);
    finite = finite && se != inf;
    double cross = 0.0;
    if (!p.omega.is_zero() && !term.sigma.is_zero())
      cross = detail::power_integral(detail::potential_on_measure(p.kernel, p.omega, term.sigma), p.gamma + term.q);
    rep.cross_integrals.push_back(cross);
    finite = finite && cross != inf;
  }
  rep.omega_integral = omega_energy(p.omega, p.gamma, p.kernel);
  finite = finite && rep.omega_integral != inf;
  rep.verdict = finite;

  double alpha = 0.0;
  if (p.kernel.is_riesz()) alpha = p.kernel.riesz().alpha;
  else if (!std::holds_alternative<MatrixKernel>(p.kernel.variant)) alpha = 2.0;  // Green kernels
  if (alpha > 0.0 && alpha < p.kernel.dim()) {
    std::vector<double> qs;
    for (const auto& t : p.terms) qs.push_back(t.q);
    rep.solution = solution_exponents(p.gamma, alpha, p.kernel.dim());
    const auto se = sufficient_exponents(p.gamma, qs, alpha, p.kernel.dim());
    rep.sufficient_terms = se.terms;
    rep.sufficient_omega = se.omega;
    rep.exponents_valid = true;
  }
  return rep;
}

}  // namespace sublin::conditions
