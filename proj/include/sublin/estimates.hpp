#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sublin/core.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"
#include "sublin/potentials.hpp"

namespace sublin::estimates {

namespace detail {

inline GridFunction potential_grid(const KernelSpec& k, const Measure& m) {
  if (k.is_riesz()) return potentials::potential_grid_fft(k, m);
  return potentials::potential_on_grid_direct(k, m);
}

}  // namespace detail

// Iterated inequality: (G sigma)^a <= a h^{a-1} G((G sigma)^{a-1} d sigma)
// for a >= 1, with >= for 0 < a <= 1 (same constant). Returns the max signed
// violation of the applicable direction over the probes, relative to rhs.
inline double iterated_check(const Measure& sigma, double a, const KernelSpec& k, const std::vector<Point>& probes) {
  if (!(a > 0.0)) throw std::invalid_argument("iterated_check: a must be positive");
  if (!sigma.density || sigma.has_atoms()) throw std::invalid_argument("iterated_check: density-only sigma required");
  const double c = a * std::pow(k.wmp_h, a - 1.0);

  const GridFunction gs = detail::potential_grid(k, sigma);
  Measure weighted;
  weighted.dim = sigma.dim;
  weighted.density = GridFunction(gs.grid, 0.0);
  for (std::size_t i = 0; i < gs.size(); ++i)
    if ((*sigma.density)[i] > 0.0) weighted.density->values[i] = (*sigma.density)[i] * std::pow(gs[i], a - 1.0);

  const auto lhs_base = potentials::potential_values(k, sigma, probes);
  const auto rhs_base = potentials::potential_values(k, weighted, probes);
  double worst = -inf;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double lhs = std::pow(lhs_base[i], a);
    const double rhs = c * rhs_base[i];
    if (!(rhs > 0.0)) continue;
    const double v = (a >= 1.0) ? (lhs - rhs) / rhs : (rhs - lhs) / rhs;
    worst = std::max(worst, v);
  }
  return worst;
}

// Bilateral bracket around a solution of the M = 1 problem:
//   c_low [ (G sigma)^{1/(1-q)} + K_alpha sigma ] + G omega <= u
//   u <= c_up [ ... ] + G omega.
// Two conventions for the kappa inside K_alpha, both certified lower bounds
// for the true constant (so c_up always covers the true upper constant):
//   frank_wolfe      — optimize over the candidate family; c_low conservative.
//   minimal_solution — evaluate at the competitor u^q d sigma induced by the
//                      solution itself; makes the far-field ratio approach 1,
//                      so the solution sits inside its own bracket.
enum class BracketConvention { frank_wolfe, minimal_solution };

struct BracketReport {
  double c_low = inf;
  double c_up = 0.0;
  std::vector<Point> probes;
  std::vector<double> bracket_values;  // (G sigma)^{1/(1-q)} + K_alpha sigma per probe
  bool degenerate = false;             // sigma empty: bracket identically zero
};

inline BracketReport bilateral_bracket(const GridFunction& u, const Measure& sigma, const Measure& omega, double q,
                                       const KernelSpec& k, const std::vector<Point>& probes,
                                       std::vector<Point> candidates = {}, std::vector<double> radii = {},
                                       int budget = 24,
                                       BracketConvention convention = BracketConvention::frank_wolfe) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("bilateral_bracket: q must lie in (0,1)");
  BracketReport rep;
  rep.probes = probes;
  if (sigma.is_zero()) {
    rep.degenerate = true;
    rep.bracket_values.assign(probes.size(), 0.0);
    return rep;
  }
  if (candidates.empty()) candidates = potentials::default_kappa_candidates(sigma, u.grid);
  if (radii.empty()) {
    radii = potentials::default_intrinsic_radii(sigma, u.grid.spacing, 96);
    // The closed-form tail of the intrinsic integral is valid only once the
    // ball holds all of sigma, so the sampled radii must reach past the
    // farthest probe; rebuild the log grid when the default stops short.
    double dmax = 0.0;
    const auto sup = potentials::detail::support_points(sigma);
    for (const auto& p : probes)
      for (const auto& s : sup) dmax = std::max(dmax, dist(p, s.loc, u.grid.dim));
    if (2.0 * dmax > radii.back()) {
      const double lo = radii.front(), hi = 2.0 * dmax;
      const int count = static_cast<int>(radii.size());
      for (int i = 0; i < count; ++i) radii[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    }
  }

  const auto gs = potentials::potential_values(k, sigma, probes);
  const auto go = potentials::potential_values(k, omega, probes);
  const double alpha = k.riesz().alpha;
  std::optional<potentials::KappaEvaluator> fw;
  std::optional<potentials::WitnessKappaEvaluator> wit;
  if (convention == BracketConvention::frank_wolfe)
    fw.emplace(sigma, q, k, candidates, budget);
  else
    wit.emplace(sigma, q, k, u);
  const auto k_alpha = [&](const Point& x) {
    return fw ? potentials::intrinsic_potential(*fw, q, alpha, x, radii)
              : potentials::intrinsic_potential(*wit, q, alpha, x, radii);
  };

  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double bracket = std::pow(gs[i], 1.0 / (1.0 - q)) + k_alpha(probes[i]);
    rep.bracket_values.push_back(bracket);
    const double excess = lorentz::value_at(u, probes[i]) - go[i];
    if (!(bracket > 0.0)) {
      if (excess > 0.0) throw std::runtime_error("bilateral_bracket: zero bracket at a probe with u > G omega");
      continue;
    }
    const double c = excess / bracket;
    rep.c_low = std::min(rep.c_low, c);
    rep.c_up = std::max(rep.c_up, c);
  }
  return rep;
}

// Key Lorentz inequality: || G sigma ||_{L^{r,rho}} <= C ( int (G sigma)^beta d sigma )^{1/(beta+1)}
// with r = n(beta+1)/(n-alpha), rho = beta+1. Both sides are 1-homogeneous in
// sigma, so the ratio is scale-invariant.
struct KeyLorentzReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  LorentzPair pair{1.0, 1.0};
};

inline KeyLorentzReport key_lorentz_check(const Measure& sigma, double beta, const KernelSpec& k) {
  if (!(beta > 0.0)) throw std::invalid_argument("key_lorentz_check: beta must be positive");
  const int n = k.dim();
  const double alpha = k.riesz().alpha;
  KeyLorentzReport rep;
  rep.pair = {n * (beta + 1.0) / (n - alpha), beta + 1.0};
  if (sigma.is_zero()) return rep;
  if (!sigma.density || sigma.has_atoms()) throw std::invalid_argument("key_lorentz_check: density-only sigma required");

  const GridFunction gs = detail::potential_grid(k, sigma);
  rep.lhs = lorentz::lorentz_norm(gs, rep.pair);
  GridFunction gb = gs;
  for (auto& v : gb.values) v = std::pow(v, beta);
  rep.rhs = std::pow(lorentz::integrate_against(gb, sigma), 1.0 / (beta + 1.0));
  if (rep.rhs > 0.0) rep.ratio = rep.lhs / rep.rhs;
  return rep;
}

// Havin-Maz'ya boundedness: || V_{alpha,p} f ||_{L^{s n (p-1)/(n - s alpha p), t (p-1)}}
// against || f ||^{1/(p-1)}_{L^{s,t}}, valid for 1 < s < n/(alpha p).
struct HavinMazyaReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  LorentzPair out_pair{1.0, 1.0};
};

inline HavinMazyaReport havin_mazya_bound_check(const GridFunction& f, double alpha, double p, double s, double t,
                                                int n, Normalization norm = Normalization::classical) {
  if (!(p > 1.0)) throw std::invalid_argument("havin_mazya_bound_check: p must exceed 1");
  if (!(s > 1.0 && s < n / (alpha * p)))
    throw std::invalid_argument("havin_mazya_bound_check: requires 1 < s < n/(alpha p)");
  HavinMazyaReport rep;
  rep.out_pair = {s * n * (p - 1.0) / (n - s * alpha * p), t * (p - 1.0)};
  bool zero = true;
  for (double v : f.values) zero = zero && v == 0.0;
  if (zero) return rep;
  const GridFunction vf = potentials::havin_mazya(alpha, p, f, norm);
  rep.lhs = lorentz::lorentz_norm(vf, rep.out_pair);
  rep.rhs = std::pow(lorentz::lorentz_norm(f, {s, t}), 1.0 / (p - 1.0));
  if (rep.rhs > 0.0) rep.ratio = rep.lhs / rep.rhs;
  return rep;
}

}  // namespace sublin::estimates
