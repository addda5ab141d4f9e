#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sublin/core.hpp"
#include "sublin/fftconv.hpp"
#include "sublin/kernels.hpp"
#include "sublin/lorentz.hpp"

namespace sublin::potentials {

struct PotentialField {
  std::optional<BoxGrid> grid;  // set when targets form a grid (values in flat order)
  std::vector<Point> points;    // set otherwise
  std::vector<double> values;   // >= 0; +inf only where a target coincides with an atom
};

namespace detail {

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
inline constexpr double gl8_x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                    -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                    0.7966664774136267,  0.9602898564975363};
inline constexpr double gl8_w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                    0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                    0.2223810344533745, 0.1012285362903763};

// Exact average of |z|^{alpha-n} over the ball of the same volume as a cell.
inline double ball_average_self(int n, double alpha, double cell_volume) {
  const double rho = std::pow(cell_volume / unit_ball_volume(n), 1.0 / n);
  return (n / alpha) * std::pow(rho, alpha - n);
}

inline double image_part_at(const KernelSpec& k, const Point& x) {
  if (const auto* b = std::get_if<GreenBall>(&k.variant)) {
    const double rx = dist(x, b->center, b->dim);
    if (rx <= 1e-14 * b->radius) return kernels::newton_constant(b->dim) * std::pow(b->radius, 2.0 - b->dim);
    // |x - x*| * rx / R with x* the Kelvin image of x reduces to (R^2 - rx^2)/R... keep the generic form.
    Point xs = b->center;
    const double scale = b->radius * b->radius / (rx * rx);
    for (int d = 0; d < b->dim; ++d) xs[d] = b->center[d] + scale * (x[d] - b->center[d]);
    const double dimg = dist(x, xs, b->dim) * rx / b->radius;
    return kernels::newton_constant(b->dim) * std::pow(dimg, 2.0 - b->dim);
  }
  if (const auto* h = std::get_if<GreenHalfSpace>(&k.variant)) {
    return kernels::newton_constant(h->dim) * std::pow(2.0 * x[h->dim - 1], 2.0 - h->dim);
  }
  return 0.0;
}

}  // namespace detail

// Cell-averaged kernel weight K-bar(x, cell). Three regimes:
//   x inside the cell      -> equal-volume-ball average of the singular part
//                             (minus the smooth image part for Green kernels);
//   within 3.5h of center  -> tensor Gauss average of the kernel over the cell,
//                             which removes the midpoint error of the near
//                             singularity;
//   farther                -> kernel at the cell center.
inline double cell_kernel_weight(const KernelSpec& k, const Point& x, const Point& cell_center, double spacing) {
  const int n = k.dim();
  double dinf = 0.0;
  for (int d = 0; d < n; ++d) dinf = std::max(dinf, std::abs(x[d] - cell_center[d]));

  if (dinf <= 0.5 * spacing * (1.0 + 1e-12)) {
    const double vol = std::pow(spacing, n);
    if (const auto* r = std::get_if<RieszKernel>(&k.variant))
      return r->constant() * detail::ball_average_self(n, r->alpha, vol);
    if (std::holds_alternative<GreenBall>(k.variant) || std::holds_alternative<GreenHalfSpace>(k.variant))
      return kernels::newton_constant(n) * detail::ball_average_self(n, 2.0, vol) - detail::image_part_at(k, cell_center);
    throw std::invalid_argument("cell_kernel_weight: MatrixKernel carries no density cells");
  }

  if (dinf <= 3.5 * spacing) {
    const double half = 0.5 * spacing;
    double acc = 0.0;
    if (n == 2) {
      for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
          const Point y{cell_center[0] + half * detail::gl8_x[a], cell_center[1] + half * detail::gl8_x[b], 0.0};
          acc += detail::gl8_w[a] * detail::gl8_w[b] * kernels::kernel_eval(k, x, y);
        }
      }
      return acc * 0.25;  // product weights sum to 2^n
    }
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        for (int c = 0; c < 8; ++c) {
          const Point y{cell_center[0] + half * detail::gl8_x[a], cell_center[1] + half * detail::gl8_x[b],
                        cell_center[2] + half * detail::gl8_x[c]};
          acc += detail::gl8_w[a] * detail::gl8_w[b] * detail::gl8_w[c] * kernels::kernel_eval(k, x, y);
        }
      }
    }
    return acc * 0.125;
  }

  return kernels::kernel_eval(k, x, cell_center);
}

// Riesz weight for an integer cell offset on a uniform grid; depends only on
// the offset, so grid paths share one table.
inline double offset_kernel_weight(const KernelSpec& k, const std::array<int, 3>& off, double spacing) {
  const int n = k.dim();
  Point x{0.0, 0.0, 0.0}, c{0.0, 0.0, 0.0};
  for (int d = 0; d < n; ++d) c[d] = off[d] * spacing;
  return cell_kernel_weight(k, x, c, spacing);
}

// Direct evaluation at arbitrary targets: atoms contribute mass * K(x, loc),
// densities contribute density * vol * K-bar(x, cell). Deterministic order:
// atoms in list order, then cells flat-ascending.
inline std::vector<double> potential_values(const KernelSpec& k, const Measure& m, const std::vector<Point>& targets) {
  const int n = k.dim();
  std::vector<double> out(targets.size(), 0.0);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Point& x = targets[t];
    double s = 0.0;
    for (const auto& a : m.atoms) {
      if (a.mass == 0.0) continue;
      const double kv = kernels::kernel_eval(k, x, a.loc);
      if (kv == inf) {
        s = inf;
        break;
      }
      s += a.mass * kv;
    }
    if (s != inf && m.density) {
      const auto& g = *m.density;
      const double vol = g.grid.cell_volume();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] == 0.0) continue;
        s += g[i] * vol * cell_kernel_weight(k, x, g.grid.cell_center(i), g.grid.spacing);
      }
    }
    (void)n;
    out[t] = s;
  }
  return out;
}

inline PotentialField potential_direct(const KernelSpec& k, const Measure& m, const std::vector<Point>& targets) {
  PotentialField f;
  f.points = targets;
  f.values = potential_values(k, m, targets);
  return f;
}

// Same-grid direct summation through a dense offset table; used as the
// reference the FFT path is measured against (identical weights, so the gap
// is transform roundoff only).
inline GridFunction potential_on_grid_direct(const KernelSpec& k, const Measure& m) {
  if (!m.density) throw std::invalid_argument("potential_on_grid_direct: density measure required");
  const BoxGrid& grid = m.density->grid;
  const int n = grid.dim;
  std::array<int, 3> tdim{1, 1, 1};
  std::size_t tcount = 1;
  for (int d = 0; d < n; ++d) {
    tdim[d] = 2 * grid.shape[d] - 1;
    tcount *= static_cast<std::size_t>(tdim[d]);
  }
  std::vector<double> table(tcount);
  for (std::size_t f = 0; f < tcount; ++f) {
    std::size_t rem = f;
    std::array<int, 3> off{0, 0, 0};
    for (int d = n - 1; d >= 0; --d) {
      off[d] = static_cast<int>(rem % static_cast<std::size_t>(tdim[d])) - (grid.shape[d] - 1);
      rem /= static_cast<std::size_t>(tdim[d]);
    }
    table[f] = offset_kernel_weight(k, off, grid.spacing);
  }
  auto table_at = [&](const std::array<int, 3>& off) {
    std::size_t f = 0;
    for (int d = 0; d < n; ++d) f = f * static_cast<std::size_t>(tdim[d]) + static_cast<std::size_t>(off[d] + grid.shape[d] - 1);
    return table[f];
  };

  const double vol = grid.cell_volume();
  GridFunction out(grid, 0.0);
  const auto& dens = m.density->values;
  const std::size_t count = grid.cell_count();
  for (std::size_t i = 0; i < count; ++i) {
    const auto ti = grid.multi_index(i);
    double s = 0.0;
    for (std::size_t j = 0; j < count; ++j) {
      if (dens[j] == 0.0) continue;
      const auto sj = grid.multi_index(j);
      std::array<int, 3> off{0, 0, 0};
      for (int d = 0; d < n; ++d) off[d] = ti[d] - sj[d];
      s += dens[j] * table_at(off);
    }
    out[i] = s * vol;
  }
  for (const auto& a : m.atoms) {
    if (a.mass == 0.0) continue;
    for (std::size_t i = 0; i < count; ++i) {
      const double kv = kernels::kernel_eval(k, grid.cell_center(i), a.loc);
      out[i] = (kv == inf) ? inf : out[i] + a.mass * kv;
    }
  }
  return out;
}

// Zero-padded FFT convolution of the density with the sampled regularized
// kernel (Riesz only). Atom contributions are added by direct evaluation.
inline GridFunction potential_grid_fft(const KernelSpec& k, const Measure& m) {
  if (!k.is_riesz()) throw std::invalid_argument("potential_grid_fft: Riesz kernel required");
  if (!m.density) throw std::invalid_argument("potential_grid_fft: density measure required");
  const BoxGrid& grid = m.density->grid;
  const double vol = grid.cell_volume();
  auto kernel_at = [&](const std::array<int, 3>& off) { return vol * offset_kernel_weight(k, off, grid.spacing); };
  GridFunction out(grid, 0.0);
  out.values = fft::convolve_free(m.density->values, grid.shape, grid.dim, kernel_at);
  for (const auto& a : m.atoms) {
    if (a.mass == 0.0) continue;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double kv = kernels::kernel_eval(k, grid.cell_center(i), a.loc);
      out[i] = (kv == inf) ? inf : out[i] + a.mass * kv;
    }
  }
  return out;
}

inline PotentialField potential_grid_fft_field(const KernelSpec& k, const Measure& m) {
  GridFunction g = potential_grid_fft(k, m);
  PotentialField f;
  f.grid = g.grid;
  f.values = std::move(g.values);
  return f;
}

namespace detail {

// Mean of |x - y|^{e1} over the sphere/circle of radius s around c, with
// r = |x - c|. Trapezoid in angle is spectrally accurate for the circle; the
// 3-D mean reduces to a 1-D integral in cos(theta) handled by Gauss nodes.
inline double shell_mean(int n, double r, double s, double e1) {
  if (n == 2) {
    constexpr int m = 512;
    double acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double th = 2.0 * pi * (i + 0.5) / m;
      acc += std::pow(r * r + s * s - 2.0 * r * s * std::cos(th), 0.5 * e1);
    }
    return acc / m;
  }
  constexpr int m = 8;  // 64 Gauss points via 8 panels of gl8
  double acc = 0.0;
  for (int p = 0; p < m; ++p) {
    const double lo = -1.0 + 2.0 * p / m, hi = lo + 2.0 / m;
    for (int i = 0; i < 8; ++i) {
      const double t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl8_x[i];
      acc += 0.5 * (hi - lo) * gl8_w[i] * std::pow(r * r + s * s - 2.0 * r * s * t, 0.5 * e1);
    }
  }
  return acc * 0.5;
}

// Integral over {|y - c| > D} of |x - y|^{e1} |y - c|^{e2} dy: log-radius
// trapezoid out to 400 D plus the closed-form monopole remainder.
inline double exterior_moment(int n, const Point& x, const Point& c, double D, double e1, double e2) {
  const double r = dist(x, c, n);
  const double area = unit_sphere_area(n);
  const double S = 400.0 * D;
  constexpr int steps = 600;
  const double dlog = std::log(S / D) / steps;
  double acc = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double s = D * std::exp(i * dlog);
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    acc += w * shell_mean(n, r, s, e1) * std::pow(s, e2) * area * std::pow(s, n - 1) * s;
  }
  acc *= dlog;
  const double p = e1 + e2 + n - 1;  // integrand exponent in ds far out
  if (!(p < -1.0)) throw std::domain_error("exterior_moment: divergent tail");
  acc += area * std::pow(S, p + 1) / (-(p + 1.0));
  return acc;
}

}  // namespace detail

// Nested Riesz application I_{a_out}[(I_{a_in} f)^{power}] evaluated on f's
// grid. The middle potential decays slowly, so it is represented on an
// `enlarge`x box (same spacing); the remainder beyond a centered ball of
// radius D is replaced by the analytic monopole integral, because beyond the
// box (I_{a_in} f)(y) ~ c * mass * |y - centroid|^{a_in - n}.
inline GridFunction riesz_compose(double a_out, double a_in, double power, const GridFunction& f,
                                  Normalization norm = Normalization::classical, int enlarge = 3) {
  const BoxGrid& g = f.grid;
  const int n = g.dim;
  if (enlarge < 1 || enlarge % 2 == 0) throw std::invalid_argument("riesz_compose: enlarge must be odd and >= 1");

  BoxGrid big = g;
  for (int d = 0; d < n; ++d) {
    big.shape[d] = enlarge * g.shape[d];
    big.origin[d] = g.origin[d] - 0.5 * (enlarge - 1) * g.shape[d] * g.spacing;
  }

  // Embed f in the enlarged box.
  GridFunction fbig(big, 0.0);
  const int off0 = (enlarge - 1) / 2;
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto idx = g.multi_index(i);
    for (int d = 0; d < n; ++d) idx[d] += off0 * g.shape[d];
    fbig[big.flat_index(idx)] = f[i];
  }

  const KernelSpec kin = make_riesz(n, a_in, norm);
  Measure mf;
  mf.dim = n;
  mf.density = fbig;
  GridFunction mid = potential_grid_fft(kin, mf);

  // Moments of f for the monopole model of the middle potential.
  const double vol = g.cell_volume();
  double mass = 0.0;
  Point centroid{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double w = f[i] * vol;
    mass += w;
    const Point p = g.cell_center(i);
    for (int d = 0; d < n; ++d) centroid[d] += w * p[d];
  }
  if (mass > 0.0)
    for (int d = 0; d < n; ++d) centroid[d] /= mass;

  // Ball radius: distance from the centroid to the nearest enlarged-box face.
  double D = inf;
  for (int d = 0; d < n; ++d) {
    D = std::min(D, centroid[d] - big.origin[d]);
    D = std::min(D, big.origin[d] + big.shape[d] * big.spacing - centroid[d]);
  }

  GridFunction midp(big, 0.0);
  for (std::size_t i = 0; i < mid.size(); ++i) {
    if (dist(big.cell_center(i), centroid, n) > D) continue;  // tail handles the exterior
    midp[i] = std::pow(mid[i], power);
  }

  const KernelSpec kout = make_riesz(n, a_out, norm);
  Measure mm;
  mm.dim = n;
  mm.density = midp;
  GridFunction outer = potential_grid_fft(kout, mm);

  const double cin = riesz_constant(n, a_in, norm);
  const double cout = riesz_constant(n, a_out, norm);
  const double tail_coef = mass > 0.0 ? cout * std::pow(cin * mass, power) : 0.0;
  const bool tail_ok = a_out + (a_in - n) * power < 0.0;

  GridFunction out(g, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto idx = g.multi_index(i);
    for (int d = 0; d < n; ++d) idx[d] += off0 * g.shape[d];
    double v = outer[big.flat_index(idx)];
    if (tail_coef > 0.0 && tail_ok)
      v += tail_coef * detail::exterior_moment(n, g.cell_center(i), centroid, D, a_out - n, (a_in - n) * power);
    out[i] = v;
  }
  return out;
}

// Havin-Maz'ya potential V_{alpha,p} f = I_alpha (I_alpha |f|)^{1/(p-1)}.
// The boundedness regime 0 < alpha < n/p is exactly what makes the tail
// correction inside riesz_compose convergent.
inline GridFunction havin_mazya(double alpha, double p, const GridFunction& f,
                                Normalization norm = Normalization::classical, int enlarge = 3) {
  const int n = f.grid.dim;
  if (!(p > 1.0)) throw std::invalid_argument("havin_mazya: p must exceed 1");
  if (!(alpha > 0.0 && alpha < n / p)) throw std::invalid_argument("havin_mazya: requires 0 < alpha < n/p");
  for (double v : f.values)
    if (!(v >= 0.0)) throw std::invalid_argument("havin_mazya: f must be nonnegative");
  return riesz_compose(alpha, alpha, 1.0 / (p - 1.0), f, norm, enlarge);
}

// ---------------------------------------------------------------------------
// kappa(B) and the intrinsic potential.

namespace detail {

struct SupportPoint {
  Point loc;
  double weight;  // atom mass or density * cell volume
};

inline std::vector<SupportPoint> support_points(const Measure& m) {
  std::vector<SupportPoint> s;
  for (const auto& a : m.atoms)
    if (a.mass > 0.0) s.push_back({a.loc, a.mass});
  if (m.density) {
    const double vol = m.density->grid.cell_volume();
    for (std::size_t i = 0; i < m.density->size(); ++i)
      if ((*m.density)[i] > 0.0) s.push_back({m.density->grid.cell_center(i), (*m.density)[i] * vol});
  }
  return s;
}

// Frank-Wolfe ascent of psi(w) = sum_l w_l^sigma (K w)_l^q over the simplex.
// psi is concave for 0 < q < 1 and the linear maximization oracle is a vertex,
// so iterates never decrease (the line search includes t = 0).
inline double frank_wolfe_kappa(const std::vector<double>& weights, const std::vector<double>& kmat,
                                std::size_t rows, std::size_t cols, double q, int budget) {
  if (rows == 0 || cols == 0) return 0.0;
  auto psi_of = [&](const std::vector<double>& iv) {
    double s = 0.0;
    for (std::size_t l = 0; l < rows; ++l) s += weights[l] * std::pow(iv[l], q);
    return s;
  };

  // Best single candidate starts the ascent.
  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t l = 0; l < rows; ++l) s += weights[l] * std::pow(kmat[l * cols + j], q);
    if (s > best_val) {
      best_val = s;
      best = j;
    }
  }
  std::vector<double> w(cols, 0.0);
  w[best] = 1.0;
  std::vector<double> iv(rows);
  for (std::size_t l = 0; l < rows; ++l) iv[l] = kmat[l * cols + best];
  double psi = best_val;

  for (int it = 0; it < budget; ++it) {
    // Supergradient and its best vertex.
    std::size_t jstar = 0;
    double gstar = -1.0;
    for (std::size_t j = 0; j < cols; ++j) {
      double gj = 0.0;
      for (std::size_t l = 0; l < rows; ++l) gj += weights[l] * std::pow(iv[l], q - 1.0) * kmat[l * cols + j];
      if (gj > gstar) {
        gstar = gj;
        jstar = j;
      }
    }
    // Concave 1-D maximization along (1-t) w + t e_jstar by golden section.
    auto phi = [&](double t) {
      double s = 0.0;
      for (std::size_t l = 0; l < rows; ++l)
        s += weights[l] * std::pow((1.0 - t) * iv[l] + t * kmat[l * cols + jstar], q);
      return s;
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = 1.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = phi(x1), f2 = phi(x2);
    for (int k = 0; k < 48; ++k) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = phi(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = phi(x1);
      }
    }
    double t = 0.5 * (a + b);
    double cand = phi(t);
    if (phi(0.0) >= cand) {  // never step downhill
      t = 0.0;
      cand = psi;
    }
    if (t > 0.0) {
      for (std::size_t l = 0; l < rows; ++l) iv[l] = (1.0 - t) * iv[l] + t * kmat[l * cols + jstar];
      for (std::size_t j = 0; j < cols; ++j) w[j] *= (1.0 - t);
      w[jstar] += t;
    }
    const double next = psi_of(iv);
    if (next <= psi * (1.0 + 1e-8)) {
      psi = std::max(psi, next);
      break;
    }
    psi = next;
  }

  // Entropic-mirror polish from the uniform point: multiplicative updates
  // reach spread-out optima that vertex insertion approaches only slowly.
  // Fixed iteration count, independent of `budget`, so a larger budget can
  // only improve the returned max of the two phases.
  {
    std::vector<double> w2(cols, 1.0 / static_cast<double>(cols)), iv2(rows, 0.0);
    std::vector<double> trial(cols), ivt(rows), grad(cols);
    for (std::size_t l = 0; l < rows; ++l) {
      double s = 0.0;
      const double* row = kmat.data() + l * cols;
      for (std::size_t j = 0; j < cols; ++j) s += row[j];
      iv2[l] = s / static_cast<double>(cols);
    }
    double psi2 = psi_of(iv2);
    double eta = 1.0;
    int stall = 0;
    for (int it = 0; it < 200 && stall < 4; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t l = 0; l < rows; ++l) {
        if (!(iv2[l] > 0.0)) continue;  // all-zero kernel row: contributes nothing
        const double c = weights[l] * std::pow(iv2[l], q - 1.0);
        const double* row = kmat.data() + l * cols;
        for (std::size_t j = 0; j < cols; ++j) grad[j] += c * row[j];
      }
      double gmax = 0.0;
      for (std::size_t j = 0; j < cols; ++j) gmax = std::max(gmax, grad[j]);
      if (!(gmax > 0.0)) break;
      double z = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        trial[j] = w2[j] * std::exp(eta * (grad[j] / gmax - 1.0));
        z += trial[j];
      }
      for (std::size_t j = 0; j < cols; ++j) trial[j] /= z;
      for (std::size_t l = 0; l < rows; ++l) {
        double s = 0.0;
        const double* row = kmat.data() + l * cols;
        for (std::size_t j = 0; j < cols; ++j) s += row[j] * trial[j];
        ivt[l] = s;
      }
      const double pt = psi_of(ivt);
      if (pt > psi2) {
        stall = (pt <= psi2 * (1.0 + 1e-12)) ? stall + 1 : 0;
        w2.swap(trial);
        iv2.swap(ivt);
        psi2 = pt;
        eta = std::min(eta * 1.25, 64.0);
      } else {
        eta *= 0.5;
        if (eta < 1e-8) break;
      }
    }
    psi = std::max(psi, psi2);
  }
  return std::pow(psi, 1.0 / q);
}

}  // namespace detail

// Least constant in || I_alpha nu ||_{L^q(d sigma_B)} <= kappa nu(R^n) over
// probability measures nu on the candidate set. Frank-Wolfe value is a
// certified lower bound for the true kappa (candidates are a restriction).
inline double kappa_ball(const Measure& sigma_B, double q, const KernelSpec& kernel,
                         const std::vector<Point>& candidates, int budget = 50) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("kappa_ball: q must lie in (0,1)");
  if (candidates.empty()) throw std::invalid_argument("kappa_ball: empty candidate set");
  const auto sup = detail::support_points(sigma_B);
  if (sup.empty()) return 0.0;
  const std::size_t rows = sup.size(), cols = candidates.size();
  const double sp = sigma_B.density ? sigma_B.density->grid.spacing : 0.0;
  std::vector<double> weights(rows), kmat(rows * cols);
  for (std::size_t l = 0; l < rows; ++l) {
    weights[l] = sup[l].weight;
    for (std::size_t j = 0; j < cols; ++j) {
      double kv = kernels::kernel_eval(kernel, sup[l].loc, candidates[j]);
      // Coincident candidate on a grid-backed support: read it as a uniform
      // measure on its own cell, whose self-potential is finite. Any such
      // measure is an admissible competitor, so the value stays a lower bound.
      if (kv == inf && sp > 0.0) kv = cell_kernel_weight(kernel, sup[l].loc, candidates[j], sp);
      if (kv == inf) throw std::invalid_argument("kappa_ball: candidate coincides with a support point");
      kmat[l * cols + j] = kv;
    }
  }
  return detail::frank_wolfe_kappa(weights, kmat, rows, cols, q, budget);
}

// Default candidates: the support's own cell centers when the measure is
// grid-backed (competitors concentrated where sigma lives dominate for spread
// measures; their matrix entries are finite cell averages), grid centers kept
// one cell away from any atom, thinned to a cap, plus a dilated shell around
// the support. Diracs on an atom give +infinity, which is degeneracy rather
// than a target, so those stay excluded.
inline std::vector<Point> default_kappa_candidates(const Measure& sigma, const BoxGrid& grid,
                                                   std::size_t cap = 256) {
  const int n = grid.dim;
  const auto sup = detail::support_points(sigma);
  std::vector<Point> out;
  if (sigma.density) {
    const auto& g = sigma.density->grid;
    std::vector<Point> centers;
    for (std::size_t i = 0; i < g.cell_count(); ++i)
      if (sigma.density->values[i] > 0.0) centers.push_back(g.cell_center(i));
    const std::size_t sstride = std::max<std::size_t>(1, centers.size() / 128);
    for (std::size_t i = 0; i < centers.size(); i += sstride) out.push_back(centers[i]);
  }
  std::vector<Point> eligible;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const Point p = grid.cell_center(i);
    double dmin = inf;
    for (const auto& a : sigma.atoms) dmin = std::min(dmin, dist(p, a.loc, n));
    if (dmin >= grid.spacing * (1.0 - 1e-12)) eligible.push_back(p);
  }
  const std::size_t stride = std::max<std::size_t>(1, eligible.size() / cap);
  for (std::size_t i = 0; i < eligible.size(); i += stride) out.push_back(eligible[i]);

  Point centroid{0.0, 0.0, 0.0};
  double tw = 0.0;
  for (const auto& s : sup) {
    tw += s.weight;
    for (int d = 0; d < n; ++d) centroid[d] += s.weight * s.loc[d];
  }
  if (tw > 0.0) {
    for (int d = 0; d < n; ++d) centroid[d] /= tw;
    double rmax = 0.0;
    for (const auto& s : sup) rmax = std::max(rmax, dist(s.loc, centroid, n));
    const double shell_r = std::max(1.25 * rmax, rmax + 2.0 * grid.spacing);
    constexpr int shell_count = 64;
    for (int i = 0; i < shell_count; ++i) {
      Point p = centroid;
      if (n == 2) {
        const double th = 2.0 * pi * i / shell_count;
        p[0] += shell_r * std::cos(th);
        p[1] += shell_r * std::sin(th);
      } else {
        // Fibonacci sphere keeps the shell deterministic and roughly uniform.
        const double z = 1.0 - 2.0 * (i + 0.5) / shell_count;
        const double phi = 2.0 * pi * i * 0.6180339887498949;
        const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
        p[0] += shell_r * rho * std::cos(phi);
        p[1] += shell_r * rho * std::sin(phi);
        p[2] += shell_r * z;
      }
      out.push_back(p);
    }
  }
  return out;
}

inline std::vector<double> default_intrinsic_radii(const Measure& sigma, double spacing, int count = 64) {
  const auto sup = detail::support_points(sigma);
  double diam = spacing;
  for (std::size_t i = 0; i < sup.size(); ++i)
    for (std::size_t j = i + 1; j < sup.size(); ++j) diam = std::max(diam, dist(sup[i].loc, sup[j].loc, sigma.dim));
  const double lo = 0.5 * spacing, hi = 4.0 * diam;
  std::vector<double> r(count);
  for (int i = 0; i < count; ++i) r[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return r;
}

// Shared state for evaluating kappa(B(x, r)) across many (x, r) pairs: the
// kernel matrix depends only on (support, candidates), and kappa depends only
// on which support points the ball captures, so values are memoized by that
// active subset.
class KappaEvaluator {
 public:
  KappaEvaluator(const Measure& sigma, double q, const KernelSpec& kernel, std::vector<Point> candidates,
                 int budget = 24)
      : q_(q), budget_(budget), candidates_(std::move(candidates)), sup_(detail::support_points(sigma)), dim_(kernel.dim()) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("KappaEvaluator: q must lie in (0,1)");
    if (candidates_.empty()) throw std::invalid_argument("KappaEvaluator: empty candidate set");
    const double sp = sigma.density ? sigma.density->grid.spacing : 0.0;
    kmat_.resize(sup_.size() * candidates_.size());
    for (std::size_t l = 0; l < sup_.size(); ++l)
      for (std::size_t j = 0; j < candidates_.size(); ++j) {
        double kv = kernels::kernel_eval(kernel, sup_[l].loc, candidates_[j]);
        // Same convention as kappa_ball: a coincident candidate on a
        // grid-backed support acts as a uniform measure on its own cell.
        if (kv == inf && sp > 0.0) kv = cell_kernel_weight(kernel, sup_[l].loc, candidates_[j], sp);
        if (kv == inf) throw std::invalid_argument("KappaEvaluator: candidate coincides with a support point");
        kmat_[l * candidates_.size() + j] = kv;
      }
  }

  double kappa(const Point& center, double radius) const {
    std::vector<std::uint32_t> active;
    active.reserve(sup_.size());
    for (std::size_t l = 0; l < sup_.size(); ++l)
      if (dist(sup_[l].loc, center, dim_) < radius) active.push_back(static_cast<std::uint32_t>(l));
    if (active.empty()) return 0.0;
    const auto it = cache_.find(active);
    if (it != cache_.end()) return it->second;

    const std::size_t cols = candidates_.size();
    std::vector<double> w(active.size()), km(active.size() * cols);
    for (std::size_t r = 0; r < active.size(); ++r) {
      w[r] = sup_[active[r]].weight;
      std::copy_n(kmat_.begin() + active[r] * cols, cols, km.begin() + r * cols);
    }
    const double v = detail::frank_wolfe_kappa(w, km, active.size(), cols, q_, budget_);
    cache_.emplace(std::move(active), v);
    return v;
  }

  const std::vector<detail::SupportPoint>& support() const { return sup_; }
  int dim() const { return dim_; }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const {
      std::size_t h = 1469598103934665603ull;
      for (auto x : v) {
        h ^= x;
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  double q_;
  int budget_;
  std::vector<Point> candidates_;
  std::vector<detail::SupportPoint> sup_;
  int dim_;
  std::vector<double> kmat_;
  mutable std::unordered_map<std::vector<std::uint32_t>, double, VecHash> cache_;
};

// kappa(B) evaluated at one fixed competitor measure nu instead of the sup:
// kappa(B) = || I_alpha(nu|_B) ||_{L^q(d sigma|_B)} / nu(B). Always a lower
// bound for the true constant. With nu = u^q sigma for the minimal solution u
// this is the bracket's minimal-solution convention. Requires a grid-backed
// sigma (atom self-interaction has no finite cell average).
class WitnessKappaEvaluator {
 public:
  WitnessKappaEvaluator(const Measure& sigma, double q, const KernelSpec& kernel, const GridFunction& u)
      : q_(q), sup_(detail::support_points(sigma)), dim_(kernel.dim()) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("WitnessKappaEvaluator: q must lie in (0,1)");
    if (!sigma.density || !sigma.atoms.empty())
      throw std::invalid_argument("WitnessKappaEvaluator: sigma must be a pure grid density");
    const double sp = sigma.density->grid.spacing;
    nu_.resize(sup_.size());
    for (std::size_t l = 0; l < sup_.size(); ++l)
      nu_[l] = std::pow(lorentz::value_at(u, sup_[l].loc), q) * sup_[l].weight;
    kmat_.resize(sup_.size() * sup_.size());
    for (std::size_t l = 0; l < sup_.size(); ++l)
      for (std::size_t m = 0; m < sup_.size(); ++m) {
        double kv = kernels::kernel_eval(kernel, sup_[l].loc, sup_[m].loc);
        if (kv == inf) kv = cell_kernel_weight(kernel, sup_[l].loc, sup_[m].loc, sp);
        kmat_[l * sup_.size() + m] = kv;
      }
  }

  double kappa(const Point& center, double radius) const {
    std::vector<std::uint32_t> active;
    active.reserve(sup_.size());
    for (std::size_t l = 0; l < sup_.size(); ++l)
      if (dist(sup_[l].loc, center, dim_) < radius) active.push_back(static_cast<std::uint32_t>(l));
    if (active.empty()) return 0.0;
    const auto it = cache_.find(active);
    if (it != cache_.end()) return it->second;

    double mass = 0.0;
    for (auto m : active) mass += nu_[m];
    double v = 0.0;
    if (mass > 0.0) {
      double acc = 0.0;
      for (auto l : active) {
        double phi = 0.0;
        for (auto m : active) phi += kmat_[l * sup_.size() + m] * nu_[m];
        acc += sup_[l].weight * std::pow(phi, q_);
      }
      v = std::pow(acc, 1.0 / q_) / mass;
    }
    cache_.emplace(std::move(active), v);
    return v;
  }

  const std::vector<detail::SupportPoint>& support() const { return sup_; }
  int dim() const { return dim_; }

 private:
  struct VecHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const {
      std::size_t h = 1469598103934665603ull;
      for (auto x : v) {
        h ^= x;
        h *= 1099511628211ull;
      }
      return h;
    }
  };
  double q_;
  std::vector<detail::SupportPoint> sup_;
  int dim_;
  std::vector<double> nu_;
  std::vector<double> kmat_;
  mutable std::unordered_map<std::vector<std::uint32_t>, double, VecHash> cache_;
};

// K_alpha sigma(x) = int_0^inf kappa(B(x,r))^{q/(1-q)} r^{alpha-n-1} dr by
// log-trapezoid over the radii grid; beyond the largest radius kappa is the
// full-measure constant and the tail integrates in closed form. Works with
// any evaluator exposing kappa(center, radius) and dim().
template <class Evaluator>
inline double intrinsic_potential(const Evaluator& ev, double q, double alpha, const Point& x,
                                  const std::vector<double>& radii) {
  const int n = ev.dim();
  if (radii.size() < 2) throw std::invalid_argument("intrinsic_potential: need at least two radii");
  const double e = q / (1.0 - q);
  double acc = 0.0;
  std::vector<double> vals(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) vals[i] = std::pow(ev.kappa(x, radii[i]), e) * std::pow(radii[i], alpha - n);
  for (std::size_t i = 0; i + 1 < radii.size(); ++i)
    acc += 0.5 * (vals[i] + vals[i + 1]) * std::log(radii[i + 1] / radii[i]);
  // Tail: kappa constant beyond any ball containing the support.
  const double rmax = radii.back();
  const double kap_inf = ev.kappa(x, inf);
  acc += std::pow(kap_inf, e) * std::pow(rmax, alpha - n) / (n - alpha);
  return acc;
}

inline double intrinsic_potential(const Measure& sigma, double q, const KernelSpec& kernel, const Point& x,
                                  const std::vector<double>& radii, const std::vector<Point>& candidates,
                                  int budget = 24) {
  KappaEvaluator ev(sigma, q, kernel, candidates, budget);
  return intrinsic_potential(ev, q, kernel.riesz().alpha, x, radii);
}

}  // namespace sublin::potentials

namespace sublin::kernels {

// Empirical weak-maximum-principle audit: sup of the potential over the
// support of sigma against its sup over the probes. Violation is a reported
// verdict, never an exception.
inline WmpReport check_wmp_empirical(const KernelSpec& k, const Measure& sigma, const std::vector<Point>& probes) {
  std::vector<Point> sup_pts;
  for (const auto& a : sigma.atoms)
    if (a.mass > 0.0) sup_pts.push_back(a.loc);
  if (sigma.density) {
    for (std::size_t i = 0; i < sigma.density->size(); ++i)
      if ((*sigma.density)[i] > 0.0) sup_pts.push_back(sigma.density->grid.cell_center(i));
  }
  if (sup_pts.empty()) throw std::invalid_argument("check_wmp_empirical: sigma has empty support");

  WmpReport rep;
  const auto on_support = potentials::potential_values(k, sigma, sup_pts);
  for (double v : on_support) rep.sup_on_support = std::max(rep.sup_on_support, v);
  const auto on_probes = potentials::potential_values(k, sigma, probes);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    if (on_probes[i] > rep.sup_on_probes) {
      rep.sup_on_probes = on_probes[i];
      rep.witness = probes[i];
    }
  }
  rep.violated = rep.sup_on_probes > k.wmp_h * rep.sup_on_support * (1.0 + 1e-9);
  return rep;
}

}  // namespace sublin::kernels
