#pragma once

// Brute-force references for tests. Everything here is deliberately
// independent of the kernels/potentials/lorentz implementations: kernels are
// written out inline, quadrature is generic adaptive Simpson, rearrangements
// are re-sorted from scratch.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sublin/core.hpp"

namespace sublin::oracle {

namespace detail {

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                                   double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw std::runtime_error("adaptive_simpson: max depth reached");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int depth = 40) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Closed form of int_{-1}^{1} (r^2 + s^2 - 2 r s t)^{(alpha-3)/2} dt, the
// polar-angle factor of 3-D radial measures.
inline double cos_integral_3d(double r, double s, double alpha) {
  if (r == 0.0 || s == 0.0) return 2.0 * std::pow(std::max(r, s), alpha - 3.0);
  const double e1 = 0.5 * (alpha - 1.0);  // exponent after antidifferentiation
  const double lo = (r - s) * (r - s), hi = (r + s) * (r + s);
  if (alpha == 1.0) return (std::log(hi) - std::log(lo)) / (2.0 * r * s);
  return (std::pow(hi, e1) - std::pow(lo, e1)) / (2.0 * r * s * e1);
}

}  // namespace detail

// Riesz potential (unit normalization) of the uniform measure of the given
// total mass on a sphere |y| = R or solid ball |y| <= R, reduced to 1-D
// quadrature. `normalization` rescales for other kernel conventions.
enum class RadialKind { sphere, ball };

inline double radial_reduction(double alpha, int n, RadialKind kind, double R, double mass, const Point& x,
                               double normalization = 1.0, double tol = 1e-11) {
  if (n != 2 && n != 3) throw std::invalid_argument("radial_reduction: n must be 2 or 3");
  if (!(alpha > 0.0 && alpha < n)) throw std::invalid_argument("radial_reduction: alpha out of (0,n)");
  if (!(R > 0.0)) throw std::invalid_argument("radial_reduction: R must be positive");
  const double r = norm(x, n);
  if (kind == RadialKind::sphere && std::abs(r - R) < 1e-12 * std::max(1.0, R))
    throw std::invalid_argument("radial_reduction: sphere evaluation needs |x| != R");

  double value = 0.0;
  if (n == 3) {
    if (kind == RadialKind::sphere) {
      value = mass * 0.5 * detail::cos_integral_3d(r, R, alpha);
    } else {
      const double dens = mass / (4.0 / 3.0 * pi * R * R * R);
      auto g = [&](double s) { return s * s * detail::cos_integral_3d(r, s, alpha); };
      value = dens * 2.0 * pi * detail::adaptive_simpson(g, 0.0, R, tol);
    }
  } else {
    auto circle = [&](double s) {
      auto g = [&](double th) { return std::pow(r * r + s * s - 2.0 * r * s * std::cos(th), 0.5 * (alpha - 2.0)); };
      if (r == 0.0 || s == 0.0) return 2.0 * pi * std::pow(std::max(r, s), alpha - 2.0);
      return 2.0 * detail::adaptive_simpson(g, 0.0, pi, tol);
    };
    if (kind == RadialKind::sphere) {
      value = mass / (2.0 * pi) * circle(R);
    } else {
      const double dens = mass / (pi * R * R);
      auto g = [&](double s) { return s * circle(s); };
      value = dens * detail::adaptive_simpson(g, 0.0, R, tol);
    }
  }
  return normalization * value;
}

// Exhaustive grid search over the probability simplex on <= 4 candidates for
// kappa(B). The kernel |x - y|^{alpha - n} is written inline on purpose.
inline double simplex_enumerate_kappa(const Measure& sigma_B, double q, double alpha,
                                      const std::vector<Point>& candidates, double resolution,
                                      double normalization = 1.0) {
  if (candidates.size() > 4) throw std::invalid_argument("simplex_enumerate_kappa: at most 4 candidates");
  if (candidates.empty()) throw std::invalid_argument("simplex_enumerate_kappa: empty candidate set");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("simplex_enumerate_kappa: q must lie in (0,1)");
  const int n = sigma_B.dim;

  std::vector<Point> pts;
  std::vector<double> wts;
  for (const auto& a : sigma_B.atoms)
    if (a.mass > 0.0) {
      pts.push_back(a.loc);
      wts.push_back(a.mass);
    }
  if (sigma_B.density) {
    const auto& d = *sigma_B.density;
    const double vol = d.grid.cell_volume();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (d[i] > 0.0) {
        pts.push_back(d.grid.cell_center(i));
        wts.push_back(d[i] * vol);
      }
  }
  if (pts.empty()) return 0.0;

  const std::size_t m = candidates.size();
  std::vector<double> kv(pts.size() * m);
  for (std::size_t l = 0; l < pts.size(); ++l)
    for (std::size_t j = 0; j < m; ++j)
      kv[l * m + j] = normalization * std::pow(dist(pts[l], candidates[j], n), alpha - n);

  const long K = std::lround(1.0 / resolution);
  double best = 0.0;
  std::vector<long> comp(m, 0);
  // Enumerate compositions of K into m parts.
  std::function<void(std::size_t, long)> walk = [&](std::size_t slot, long left) {
    if (slot + 1 == m) {
      comp[slot] = left;
      double psi = 0.0;
      for (std::size_t l = 0; l < pts.size(); ++l) {
        double iv = 0.0;
        for (std::size_t j = 0; j < m; ++j) iv += static_cast<double>(comp[j]) / K * kv[l * m + j];
        psi += wts[l] * std::pow(iv, q);
      }
      best = std::max(best, psi);
      return;
    }
    for (long c = 0; c <= left; ++c) {
      comp[slot] = c;
      walk(slot + 1, left - c);
    }
  };
  walk(0, K);
  return std::pow(best, 1.0 / q);
}

// Definitional Lorentz norm: re-sorts from scratch and integrates
// (t^{1/r} f*(t))^rho dt/t by composite Simpson in log t on each step.
inline double lorentz_by_quadrature(const GridFunction& f, double r, double rho) {
  std::vector<double> v(f.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(f[i]);
  std::sort(v.begin(), v.end(), std::greater<double>());
  const double vol = f.grid.cell_volume();

  // Breakpoints of f* without merging ties (harmless duplicates).
  std::vector<double> t(v.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) t[i + 1] = t[i] + vol;

  if (rho == inf) {
    double m = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] == 0.0) continue;
      for (int j = 1; j <= 64; ++j) {
        const double tt = t[k] + (t[k + 1] * (1.0 - 1e-9) - t[k]) * j / 64.0;
        if (tt > 0.0) m = std::max(m, std::pow(tt, 1.0 / r) * v[k]);
      }
    }
    return m;
  }

  double acc = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] == 0.0) continue;
    const double hi = t[k + 1];
    const double lo = (t[k] > 0.0) ? t[k] : hi * 1e-60;  // integrable blow-down toward t = 0
    const double sa = std::log(lo), sb = std::log(hi);
    const int panels = (t[k] > 0.0) ? 1024 : 4096;
    const double h = (sb - sa) / panels;
    auto g = [&](double s) { return std::pow(std::exp(s), rho / r) * std::pow(v[k], rho); };
    double seg = g(sa) + g(sb);
    for (int j = 1; j < panels; ++j) seg += (j % 2 == 1 ? 4.0 : 2.0) * g(sa + j * h);
    acc += seg * h / 3.0;
  }
  return std::pow(acc, 1.0 / rho);
}

}  // namespace sublin::oracle
