#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "sublin/core.hpp"

namespace sublin {

enum class Normalization { unit, classical };

// c(n, alpha) = Gamma((n-alpha)/2) / (2^alpha pi^{n/2} Gamma(alpha/2)).
// The classical constant makes I_a(I_b f) = I_{a+b} f exact; unit mode drops it.
inline double riesz_constant(int n, double alpha, Normalization norm) {
  if (norm == Normalization::unit) return 1.0;
  return std::tgamma(0.5 * (n - alpha)) /
         (std::pow(2.0, alpha) * std::pow(pi, 0.5 * n) * std::tgamma(0.5 * alpha));
}

struct RieszKernel {
  double alpha = 1.0;  // 0 < alpha < n
  int dim = 2;
  Normalization normalization = Normalization::classical;

  double constant() const { return riesz_constant(dim, alpha, normalization); }
};

struct GreenBall {
  int dim = 3;  // n >= 3
  double radius = 1.0;
  Point center{0.0, 0.0, 0.0};
};

struct GreenHalfSpace {
  int dim = 3;  // n >= 3; domain is x_n > 0
};

struct MatrixKernel {
  int dim = 2;
  std::vector<Point> points;
  std::vector<double> entries;  // row-major square, >= 0

  double at(std::size_t i, std::size_t j) const { return entries[i * points.size() + j]; }
  // Locations must coincide with kernel points; lookup is exact up to rounding.
  std::size_t index_of(const Point& p) const {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (dist(points[i], p, dim) <= 1e-12) return i;
    throw std::invalid_argument("MatrixKernel: point is not a kernel node");
  }
};

struct KernelSpec {
  std::variant<RieszKernel, GreenBall, GreenHalfSpace, MatrixKernel> variant;
  double quasi_sym_a = 1.0;  // >= 1
  double wmp_h = 1.0;        // >= 1; forced to 1 where the strong maximum principle holds
  bool wmp_estimated = false;

  int dim() const {
    return std::visit([](const auto& k) { return k.dim; }, variant);
  }
  bool is_riesz() const { return std::holds_alternative<RieszKernel>(variant); }
  const RieszKernel& riesz() const { return std::get<RieszKernel>(variant); }

  void validate() const {
    if (quasi_sym_a < 1.0) throw std::invalid_argument("KernelSpec: quasi_sym_a must be >= 1");
    if (wmp_h < 1.0) throw std::invalid_argument("KernelSpec: wmp_h must be >= 1");
    if (const auto* r = std::get_if<RieszKernel>(&variant)) {
      if (!(r->alpha > 0.0 && r->alpha < r->dim)) throw std::invalid_argument("KernelSpec: Riesz requires 0 < alpha < n");
    } else if (const auto* b = std::get_if<GreenBall>(&variant)) {
      if (b->dim < 3) throw std::invalid_argument("KernelSpec: GreenBall requires n >= 3");
      if (!(b->radius > 0.0)) throw std::invalid_argument("KernelSpec: GreenBall radius must be positive");
    } else if (const auto* h = std::get_if<GreenHalfSpace>(&variant)) {
      if (h->dim < 3) throw std::invalid_argument("KernelSpec: GreenHalfSpace requires n >= 3");
    } else if (const auto* m = std::get_if<MatrixKernel>(&variant)) {
      if (m->points.empty() || m->entries.size() != m->points.size() * m->points.size())
        throw std::invalid_argument("KernelSpec: MatrixKernel entries must form a square over its points");
      for (double e : m->entries)
        if (!(e >= 0.0)) throw std::invalid_argument("KernelSpec: MatrixKernel entries must be >= 0");
    }
  }
};

inline KernelSpec make_riesz(int n, double alpha, Normalization norm = Normalization::classical) {
  KernelSpec k;
  k.variant = RieszKernel{alpha, n, norm};
  // Strong maximum principle (h = 1) holds for alpha <= 2; beyond that the
  // numeric constant is not pinned down, so it stays a configuration input.
  if (alpha > 2.0) {
    k.wmp_h = 2.0;
    k.wmp_estimated = true;
  }
  k.validate();
  return k;
}

inline KernelSpec make_green_ball(int n, double radius, const Point& center = {0.0, 0.0, 0.0}) {
  KernelSpec k;
  k.variant = GreenBall{n, radius, center};
  k.validate();
  return k;
}

inline KernelSpec make_green_half_space(int n) {
  KernelSpec k;
  k.variant = GreenHalfSpace{n};
  k.validate();
  return k;
}

inline KernelSpec make_matrix_kernel(int dim, std::vector<Point> points, std::vector<double> entries) {
  KernelSpec k;
  k.variant = MatrixKernel{dim, std::move(points), std::move(entries)};
  const auto& m = std::get<MatrixKernel>(k.variant);
  double a = 1.0;
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    for (std::size_t j = i + 1; j < m.points.size(); ++j) {
      const double gij = m.at(i, j), gji = m.at(j, i);
      if (gij > 0.0 && gji > 0.0) a = std::max({a, gij / gji, gji / gij});
    }
  }
  k.quasi_sym_a = a;
  k.wmp_h = 1.0;  // caller overrides when the matrix is built to break the WMP
  k.validate();
  return k;
}

namespace kernels {

// Newtonian constant 1/((n-2) * area(S^{n-1})): -Delta G = delta.
inline double newton_constant(int n) { return 1.0 / ((n - 2) * unit_sphere_area(n)); }

inline double green_ball_eval(const GreenBall& b, const Point& x, const Point& y) {
  const int n = b.dim;
  const double R = b.radius;
  const double rx = dist(x, b.center, n), ry = dist(y, b.center, n);
  if (rx >= R || ry >= R) throw std::domain_error("GreenBall: point outside the ball");
  const double d = dist(x, y, n);
  const double cn = newton_constant(n);
  const double eps = 1e-14 * R;
  if (rx <= eps || ry <= eps) {
    // Radial limit of the image term as one argument hits the center.
    const double r = std::max(rx, ry);
    if (d <= 0.0) return inf;
    return cn * (std::pow(r, 2.0 - n) - std::pow(R, 2.0 - n));
  }
  if (d <= 0.0) return inf;
  // Kelvin image of y: y* = c + R^2 (y-c)/|y-c|^2; image distance scaled by |y-c|/R.
  Point ystar = b.center;
  const double scale = R * R / (ry * ry);
  for (int k = 0; k < n; ++k) ystar[k] = b.center[k] + scale * (y[k] - b.center[k]);
  const double dimg = dist(x, ystar, n) * ry / R;
  return cn * (std::pow(d, 2.0 - n) - std::pow(dimg, 2.0 - n));
}

inline double green_half_space_eval(const GreenHalfSpace& h, const Point& x, const Point& y) {
  const int n = h.dim;
  if (x[n - 1] <= 0.0 || y[n - 1] <= 0.0) throw std::domain_error("GreenHalfSpace: point outside the half-space");
  const double d = dist(x, y, n);
  if (d <= 0.0) return inf;
  Point ybar = y;
  ybar[n - 1] = -y[n - 1];
  const double dbar = dist(x, ybar, n);
  return newton_constant(n) * (std::pow(d, 2.0 - n) - std::pow(dbar, 2.0 - n));
}

inline double kernel_eval(const KernelSpec& k, const Point& x, const Point& y) {
  if (const auto* r = std::get_if<RieszKernel>(&k.variant)) {
    const double d = dist(x, y, r->dim);
    if (d <= 0.0) return inf;
    return r->constant() * std::pow(d, r->alpha - r->dim);
  }
  if (const auto* b = std::get_if<GreenBall>(&k.variant)) return green_ball_eval(*b, x, y);
  if (const auto* h = std::get_if<GreenHalfSpace>(&k.variant)) return green_half_space_eval(*h, x, y);
  const auto& m = std::get<MatrixKernel>(k.variant);
  return m.at(m.index_of(x), m.index_of(y));
}

// Max over samples of max(G(x,y)/G(y,x), G(y,x)/G(x,y)); must not exceed quasi_sym_a.
inline double check_quasi_symmetry(const KernelSpec& k, const std::vector<std::pair<Point, Point>>& samples) {
  double worst = 1.0;
  for (const auto& [x, y] : samples) {
    const double gxy = kernel_eval(k, x, y), gyx = kernel_eval(k, y, x);
    if (gxy <= 0.0 || gyx <= 0.0) throw std::domain_error("check_quasi_symmetry: kernel vanishes at a sample");
    worst = std::max({worst, gxy / gyx, gyx / gxy});
  }
  return worst;
}

struct WmpReport {
  double sup_on_support = 0.0;
  double sup_on_probes = 0.0;
  bool violated = false;
  Point witness{0.0, 0.0, 0.0};
};

}  // namespace kernels

struct ProblemTerm {
  Measure sigma;
  double q = 0.5;  // in (0, 1)
};

struct ProblemSpec {
  KernelSpec kernel;
  std::vector<ProblemTerm> terms;  // nonempty
  Measure omega;                   // may be zero
  double gamma = 1.0;              // > 0

  void validate() const {
    kernel.validate();
    if (terms.empty()) throw std::invalid_argument("ProblemSpec: terms must be nonempty");
    bool all_zero = omega.is_zero();
    for (const auto& t : terms) {
      if (!(t.q > 0.0 && t.q < 1.0)) throw std::invalid_argument("ProblemSpec: q must lie in (0,1)");
      t.sigma.validate();
      if (!t.sigma.is_zero()) all_zero = false;
      // Atomic sigma_i self-interaction diverges for singular kernels; only the
      // finite MatrixKernel diagonal supports atoms in the coefficient.
      if (t.sigma.has_atoms() && !std::holds_alternative<MatrixKernel>(kernel.variant))
        throw std::invalid_argument("ProblemSpec: atomic sigma_i rejected (self-interaction diverges)");
    }
    omega.validate();
    if (!(gamma > 0.0)) throw std::invalid_argument("ProblemSpec: gamma must be positive");
    if (all_zero) throw std::invalid_argument("ProblemSpec: all measures are zero");
  }
};

}  // namespace sublin
