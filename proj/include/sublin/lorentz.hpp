#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sublin/core.hpp"

namespace sublin::lorentz {

// Decreasing rearrangement of a grid function as an exact step function:
// levels[k] holds on [breakpoints[k], breakpoints[k+1]).
struct StepRearrangement {
  std::vector<double> breakpoints;  // t_0 = 0 < t_1 < ... < t_K = total volume
  std::vector<double> levels;       // strictly decreasing, size K
};

inline StepRearrangement rearrange(const GridFunction& f) {
  std::vector<double> v(f.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(f[i])) throw std::invalid_argument("rearrange: finite values required");
    v[i] = std::abs(f[i]);
  }
  std::sort(v.begin(), v.end(), std::greater<double>());
  const double vol = f.grid.cell_volume();
  StepRearrangement s;
  s.breakpoints.push_back(0.0);
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;  // exact ties merge into one step
    s.levels.push_back(v[i]);
    s.breakpoints.push_back(s.breakpoints.back() + static_cast<double>(j - i) * vol);
    i = j;
  }
  return s;
}

// Distribution function |{ |f| > lambda }| read off the step rearrangement.
inline double distribution_measure(const StepRearrangement& s, double lambda) {
  double m = 0.0;
  for (std::size_t k = 0; k < s.levels.size(); ++k)
    if (s.levels[k] > lambda) m = s.breakpoints[k + 1];
  return m;
}

// || f ||_{L^{r,rho}} by closed-form integration of (t^{1/r} f*(t))^rho dt/t
// on each step; the rho = +inf branch is the sup at right endpoints, exact
// for step functions.
inline double lorentz_norm_rearranged(const StepRearrangement& s, const LorentzPair& p) {
  p.validate();
  if (p.rho == inf) {
    double m = 0.0;
    for (std::size_t k = 0; k < s.levels.size(); ++k)
      m = std::max(m, s.levels[k] * std::pow(s.breakpoints[k + 1], 1.0 / p.r));
    return m;
  }
  const double e = p.rho / p.r;
  double acc = 0.0;
  for (std::size_t k = 0; k < s.levels.size(); ++k) {
    if (s.levels[k] == 0.0) continue;
    acc += std::pow(s.levels[k], p.rho) * (std::pow(s.breakpoints[k + 1], e) - std::pow(s.breakpoints[k], e)) / e;
  }
  return std::pow(acc, 1.0 / p.rho);
}

inline double lorentz_norm(const GridFunction& f, const LorentzPair& p) {
  return lorentz_norm_rearranged(rearrange(f), p);
}

// Value of a grid function at a point: the containing cell's value.
inline double value_at(const GridFunction& f, const Point& x) {
  const BoxGrid& g = f.grid;
  std::array<int, 3> idx{0, 0, 0};
  for (int d = 0; d < g.dim; ++d) {
    const int i = static_cast<int>(std::floor((x[d] - g.origin[d]) / g.spacing));
    if (i < 0 || i >= g.shape[d]) throw std::out_of_range("value_at: point outside the grid");
    idx[d] = i;
  }
  return f[g.flat_index(idx)];
}

// integral of f against a measure: atoms read the containing cell, density
// cells pair up only when the grids share a layout (otherwise each density
// cell center is located in f's grid). +inf propagates.
inline double integrate_against(const GridFunction& f, const Measure& m) {
  double acc = 0.0;
  for (const auto& a : m.atoms) {
    if (a.mass == 0.0) continue;
    const double v = value_at(f, a.loc);
    if (v == inf) return inf;
    acc += a.mass * v;
  }
  if (m.density) {
    const auto& d = *m.density;
    const double vol = d.grid.cell_volume();
    if (d.grid.same_layout(f.grid)) {
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] == 0.0) continue;
        if (f[i] == inf) return inf;
        acc += d[i] * vol * f[i];
      }
    } else {
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] == 0.0) continue;
        const double v = value_at(f, d.grid.cell_center(i));
        if (v == inf) return inf;
        acc += d[i] * vol * v;
      }
    }
  }
  return acc;
}

inline double lp_norm_measure(const GridFunction& f, double p, const Measure& m) {
  if (!(p > 0.0)) throw std::invalid_argument("lp_norm_measure: p must be positive");
  GridFunction g = f;
  for (auto& v : g.values) v = (v == inf) ? inf : std::pow(std::abs(v), p);
  const double s = integrate_against(g, m);
  return (s == inf) ? inf : std::pow(s, 1.0 / p);
}

// Plain Lebesgue L^p norm on the grid, for the L^{p,p} cross-checks.
inline double lp_norm_grid(const GridFunction& f, double p) {
  const double vol = f.grid.cell_volume();
  double acc = 0.0;
  for (double v : f.values) acc += std::pow(std::abs(v), p) * vol;
  return std::pow(acc, 1.0 / p);
}

}  // namespace sublin::lorentz
