#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sublin/core.hpp"
#include "sublin/fftconv.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"
#include "sublin/potentials.hpp"

namespace sublin::energy {

// Boundary decay gate for transform-based seminorms: outer-layer max against
// interior max. Grid functions that do not decay wrap around the padded box
// and the Fourier value loses meaning, so callers attach a warning.
inline bool boundary_decay_ok(const GridFunction& u, double factor = 1e-3) {
  const BoxGrid& g = u.grid;
  double boundary = 0.0, interior = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto idx = g.multi_index(i);
    bool on_boundary = false;
    for (int d = 0; d < g.dim; ++d)
      if (idx[d] == 0 || idx[d] == g.shape[d] - 1) on_boundary = true;
    if (on_boundary) boundary = std::max(boundary, std::abs(u[i]));
    else interior = std::max(interior, std::abs(u[i]));
  }
  return boundary <= factor * interior;
}

// || u ||^2_{H-dot^{alpha/2}} as the |xi|^alpha quadratic form of the discrete
// Fourier transform on the grid zero-padded by one full box per axis:
//   u-hat(xi_k) = cell_volume * DFT_k,   value = L_pad^{-n} sum |xi_k|^alpha |u-hat_k|^2.
inline double fractional_seminorm_sq(const GridFunction& u, double alpha) {
  const BoxGrid& g = u.grid;
  const int n = g.dim;
  std::array<int, 3> pad{1, 1, 1};
  std::size_t pcount = 1;
  for (int d = 0; d < n; ++d) {
    pad[d] = 2 * g.shape[d];
    pcount *= static_cast<std::size_t>(pad[d]);
  }
  std::vector<std::complex<double>> buf(pcount, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto idx = g.multi_index(i);
    std::size_t f = 0;
    for (int d = 0; d < n; ++d) f = f * static_cast<std::size_t>(pad[d]) + static_cast<std::size_t>(idx[d]);
    buf[f] = u[i];
  }
  fft::dft_inplace(buf, pad, n, FFTW_FORWARD);

  const double vol = g.cell_volume();
  double acc = 0.0;
  for (std::size_t f = 0; f < pcount; ++f) {
    std::size_t rem = f;
    double xi_sq = 0.0;
    for (int d = n - 1; d >= 0; --d) {
      const int k = static_cast<int>(rem % static_cast<std::size_t>(pad[d]));
      rem /= static_cast<std::size_t>(pad[d]);
      const int m = (k < pad[d] / 2) ? k : k - pad[d];
      const double xi = 2.0 * pi * m / (pad[d] * g.spacing);
      xi_sq += xi * xi;
    }
    const double mag = std::abs(buf[f]) * vol;
    acc += std::pow(xi_sq, 0.5 * alpha) * mag * mag;
  }
  double lpad_n = 1.0;
  for (int d = 0; d < n; ++d) lpad_n *= pad[d] * g.spacing;
  return acc / lpad_n;
}

// Raw Gagliardo double sum: sum over ordered pairs x != y of
// |u(x)-u(y)|^2 / |x-y|^{n+alpha} * cell_volume^2. Quadratic cost, so capped.
inline double gagliardo_seminorm_sq(const GridFunction& u, double alpha, std::size_t cell_budget = 4096) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("gagliardo_seminorm_sq: requires 0 < alpha < 2");
  const BoxGrid& g = u.grid;
  const std::size_t count = g.cell_count();
  if (count > cell_budget) throw std::invalid_argument("gagliardo_seminorm_sq: grid size over budget");
  const double vol2 = g.cell_volume() * g.cell_volume();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Point xi = g.cell_center(i);
    for (std::size_t j = 0; j < count; ++j) {
      if (i == j) continue;
      const double d = dist(xi, g.cell_center(j), g.dim);
      const double du = u[i] - u[j];
      acc += du * du * std::pow(d, -(g.dim + alpha)) * vol2;
    }
  }
  return acc;
}

// Multiply the raw Gagliardo sum by this to land in H-dot^{alpha/2}-squared
// units: the classical identity is
//   || u ||^2_{H-dot^{alpha/2}} = C(n, alpha/2)/2 * [Gagliardo sum],
//   C(n, s) = 4^s Gamma(n/2 + s) / ( pi^{n/2} |Gamma(-s)| ).
inline double gagliardo_equivalence_constant(int n, double alpha) {
  const double s = 0.5 * alpha;
  const double c = std::pow(4.0, s) * std::tgamma(0.5 * n + s) / (std::pow(pi, 0.5 * n) * std::abs(std::tgamma(-s)));
  return 0.5 * c;
}

struct EnergyReport {
  double seminorm_sq = 0.0;
  double rhs_identity = 0.0;  // sum_i int u^{1+q_i} d sigma_i + int u d omega
  double relative_gap = 0.0;
  std::optional<double> gagliardo_sq;  // raw double sum when requested
  bool boundary_warning = false;
};

// Evaluate the defining map sum_i G((u^{q_i}) d sigma_i) + G omega on a grid
// enlarged by `factor` per axis (same spacing, centered). The data live in the
// original box, so this is the equation's own exterior extension of u; the
// seminorm of a slowly decaying solution is only meaningful on such an
// enlargement. Density sigma_i required (atoms make u infinite on their cell).
inline GridFunction extend_by_equation(const ProblemSpec& p, const GridFunction& u, int factor) {
  if (factor < 1) throw std::invalid_argument("extend_by_equation: factor must be >= 1");
  if (factor == 1) return u;
  const BoxGrid& g = u.grid;
  BoxGrid big = g;
  for (int d = 0; d < g.dim; ++d) {
    if ((factor - 1) * g.shape[d] % 2 != 0)
      throw std::invalid_argument("extend_by_equation: enlargement must keep cell centers aligned");
    big.shape[d] = factor * g.shape[d];
    big.origin[d] = g.origin[d] - g.spacing * ((factor - 1) * g.shape[d] / 2);
  }
  auto embed = [&](const GridFunction& w) {
    GridFunction out(big, 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto idx = g.multi_index(i);
      std::array<int, 3> bidx{0, 0, 0};
      for (int d = 0; d < g.dim; ++d) bidx[d] = idx[d] + (factor - 1) * g.shape[d] / 2;
      out[big.flat_index(bidx)] = w[i];
    }
    return out;
  };
  GridFunction ubig(big, 0.0);
  for (const auto& t : p.terms) {
    if (t.sigma.is_zero()) continue;
    if (!t.sigma.density || t.sigma.has_atoms())
      throw std::invalid_argument("extend_by_equation: sigma terms must be pure densities");
    GridFunction w = *t.sigma.density;
    if (!w.grid.same_layout(g)) throw std::invalid_argument("extend_by_equation: sigma grid must match u");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= std::pow(u[i], t.q);
    Measure mb;
    mb.dim = g.dim;
    mb.density = embed(w);
    const GridFunction pot = potentials::potential_grid_fft(p.kernel, mb);
    for (std::size_t i = 0; i < ubig.size(); ++i) ubig[i] += pot[i];
  }
  if (!p.omega.is_zero()) {
    Measure mb;
    mb.dim = g.dim;
    mb.atoms = p.omega.atoms;
    mb.density = p.omega.density ? embed(*p.omega.density) : GridFunction(big, 0.0);
    const GridFunction pot = potentials::potential_grid_fft(p.kernel, mb);
    for (std::size_t i = 0; i < ubig.size(); ++i) ubig[i] += pot[i];
  }
  return ubig;
}

// Energy identity of the finite-energy solution (gamma = 1):
//   || u ||^2_{H-dot^{alpha/2}} = sum_i int u^{1+q_i} d sigma_i + int u d omega.
// Requires the classical Riesz normalization, which is the convention that
// inverts the fractional Laplacian.
inline EnergyReport energy_identity_check(const ProblemSpec& p, const GridFunction& u, bool with_gagliardo = false,
                                          int extension_factor = 1) {
  if (p.gamma != 1.0) throw std::invalid_argument("energy identity requires gamma = 1");
  if (!p.kernel.is_riesz() || p.kernel.riesz().normalization != Normalization::classical)
    throw std::invalid_argument("energy identity requires a classical-normalization Riesz kernel");
  const double alpha = p.kernel.riesz().alpha;

  EnergyReport rep;
  const GridFunction uext = extend_by_equation(p, u, extension_factor);
  rep.seminorm_sq = fractional_seminorm_sq(uext, alpha);
  rep.boundary_warning = !boundary_decay_ok(uext);
  double rhs = 0.0;
  for (const auto& t : p.terms) {
    if (t.sigma.is_zero()) continue;
    GridFunction up = u;
    for (auto& v : up.values) v = std::pow(v, 1.0 + t.q);
    rhs += lorentz::integrate_against(up, t.sigma);
  }
  if (!p.omega.is_zero()) rhs += lorentz::integrate_against(u, p.omega);
  rep.rhs_identity = rhs;
  if (rhs > 0.0) rep.relative_gap = std::abs(rep.seminorm_sq - rhs) / rhs;
  if (with_gagliardo) rep.gagliardo_sq = gagliardo_seminorm_sq(u, alpha);
  return rep;
}

enum class SeminormForm { gagliardo, fourier };

struct ConvexityReport {
  double lhs = 0.0;   // seminorm^2 of Gamma_t
  double rhs = 0.0;   // (1-t) seminorm^2(v) + t seminorm^2(u)
  double slack = 0.0; // rhs - lhs
};

// Hidden convexity along Gamma_t = [(1-t) v^2 + t u^2]^{1/2}: the square of
// the seminorm is convex in u^2. With the Gagliardo form this reduces to the
// pointwise inequality |Gamma(x)-Gamma(y)|^2 <= (1-t)|v(x)-v(y)|^2 + t|u(x)-u(y)|^2.
// Endpoints and u = v short-circuit to the exact same evaluation, so the
// reported slack is exactly zero there.
inline ConvexityReport hidden_convexity_check(const GridFunction& u, const GridFunction& v, double t, double alpha,
                                              SeminormForm form = SeminormForm::gagliardo) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("hidden_convexity_check: t must lie in [0,1]");
  if (!u.grid.same_layout(v.grid)) throw std::invalid_argument("hidden_convexity_check: grids must match");
  auto sn = [&](const GridFunction& f) {
    return form == SeminormForm::gagliardo ? gagliardo_seminorm_sq(f, alpha) : fractional_seminorm_sq(f, alpha);
  };
  ConvexityReport rep;
  const double su = sn(u), sv = sn(v);
  rep.rhs = (1.0 - t) * sv + t * su;
  if (t == 0.0) {
    rep.lhs = sv;
  } else if (t == 1.0 || u.values == v.values) {
    rep.lhs = su;
    if (u.values == v.values) rep.rhs = su;  // (1-t) s + t s reassembled without roundoff
  } else {
    GridFunction gamma = u;
    for (std::size_t i = 0; i < gamma.size(); ++i)
      gamma[i] = std::sqrt((1.0 - t) * v[i] * v[i] + t * u[i] * u[i]);
    rep.lhs = sn(gamma);
  }
  rep.slack = rep.rhs - rep.lhs;
  return rep;
}

}  // namespace sublin::energy
