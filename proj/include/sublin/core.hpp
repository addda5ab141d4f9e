#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sublin {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double inf = std::numeric_limits<double>::infinity();

// Points carry up to three coordinates; the active dimension travels with the
// grid / measure that owns them. Trailing entries stay zero below dim 3.
using Point = std::array<double, 3>;

inline Point make_point(double x, double y, double z = 0.0) { return {x, y, z}; }

inline double dist(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return std::sqrt(s);
}

inline double norm(const Point& a, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += a[d] * a[d];
  return std::sqrt(s);
}

// Volume of the unit ball in R^dim.
inline double unit_ball_volume(int dim) {
  return std::pow(pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

// Surface area of the unit sphere S^{dim-1}.
inline double unit_sphere_area(int dim) {
  return 2.0 * std::pow(pi, 0.5 * dim) / std::tgamma(0.5 * dim);
}

struct BoxGrid {
  int dim = 2;  // n >= 2
  Point origin{0.0, 0.0, 0.0};
  double spacing = 1.0;  // uniform across axes, > 0
  std::array<int, 3> shape{1, 1, 1};  // trailing entries 1 below dim 3

  std::size_t cell_count() const {
    std::size_t c = 1;
    for (int d = 0; d < dim; ++d) c *= static_cast<std::size_t>(shape[d]);
    return c;
  }
  double cell_volume() const { return std::pow(spacing, dim); }

  // Flat index is row-major with the last active axis fastest.
  std::size_t flat_index(const std::array<int, 3>& idx) const {
    std::size_t f = 0;
    for (int d = 0; d < dim; ++d) f = f * static_cast<std::size_t>(shape[d]) + static_cast<std::size_t>(idx[d]);
    return f;
  }
  std::array<int, 3> multi_index(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int d = dim - 1; d >= 0; --d) {
      idx[d] = static_cast<int>(flat % static_cast<std::size_t>(shape[d]));
      flat /= static_cast<std::size_t>(shape[d]);
    }
    return idx;
  }
  Point cell_center(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Point p{0.0, 0.0, 0.0};
    for (int d = 0; d < dim; ++d) p[d] = origin[d] + (idx[d] + 0.5) * spacing;
    return p;
  }
  bool contains(const Point& p) const {
    for (int d = 0; d < dim; ++d) {
      if (p[d] < origin[d] || p[d] > origin[d] + shape[d] * spacing) return false;
    }
    return true;
  }
  bool same_layout(const BoxGrid& o) const {
    if (dim != o.dim || spacing != o.spacing) return false;
    for (int d = 0; d < dim; ++d) {
      if (shape[d] != o.shape[d] || origin[d] != o.origin[d]) return false;
    }
    return true;
  }

  void validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("BoxGrid: dim must be 1..3");
    if (!(spacing > 0.0)) throw std::invalid_argument("BoxGrid: spacing must be positive");
    for (int d = 0; d < dim; ++d)
      if (shape[d] < 1) throw std::invalid_argument("BoxGrid: shape entries must be >= 1");
  }
};

struct GridFunction {
  BoxGrid grid;
  std::vector<double> values;  // finite or +inf; +inf marks potentials at atoms

  GridFunction() = default;
  explicit GridFunction(const BoxGrid& g, double fill = 0.0) : grid(g), values(g.cell_count(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }

  void validate() const {
    grid.validate();
    if (values.size() != grid.cell_count()) throw std::invalid_argument("GridFunction: value count does not match grid");
    for (double v : values)
      if (std::isnan(v)) throw std::invalid_argument("GridFunction: NaN value");
  }
};

struct Atom {
  Point loc{0.0, 0.0, 0.0};
  double mass = 0.0;  // >= 0
};

struct Measure {
  int dim = 2;
  std::vector<Atom> atoms;
  std::optional<GridFunction> density;  // values >= 0, density against Lebesgue measure

  bool is_zero() const {
    for (const auto& a : atoms)
      if (a.mass > 0.0) return false;
    if (density) {
      for (double v : density->values)
        if (v > 0.0) return false;
    }
    return true;
  }
  bool has_atoms() const {
    for (const auto& a : atoms)
      if (a.mass > 0.0) return true;
    return false;
  }

  void validate() const {
    for (const auto& a : atoms) {
      if (!(a.mass >= 0.0)) throw std::invalid_argument("Measure: atom mass must be >= 0");
      for (int d = 0; d < dim; ++d)
        if (!std::isfinite(a.loc[d])) throw std::invalid_argument("Measure: atom location must be finite");
    }
    if (density) {
      density->validate();
      if (density->grid.dim != dim) throw std::invalid_argument("Measure: density grid dimension mismatch");
      for (double v : density->values)
        if (!(v >= 0.0)) throw std::invalid_argument("Measure: density must be >= 0");
    }
  }
};

// Sums run in flat-index order (atoms first, in list order) so every report is
// bit-reproducible.
inline double total_mass(const Measure& m) {
  double s = 0.0;
  for (const auto& a : m.atoms) s += a.mass;
  if (m.density) {
    const double vol = m.density->grid.cell_volume();
    double d = 0.0;
    for (double v : m.density->values) d += v;
    s += d * vol;
  }
  return s;
}

// Keeps atoms / density cells whose location (cell center) lies strictly
// inside the ball. Cell membership by center: the half-cell boundary error
// vanishes under refinement.
inline Measure restrict_to_ball(const Measure& m, const Point& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("restrict_to_ball: radius must be positive");
  Measure out;
  out.dim = m.dim;
  for (const auto& a : m.atoms)
    if (dist(a.loc, center, m.dim) < radius) out.atoms.push_back(a);
  if (m.density) {
    GridFunction g(m.density->grid, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if ((*m.density)[i] > 0.0 && dist(g.grid.cell_center(i), center, m.dim) < radius) g[i] = (*m.density)[i];
    }
    out.density = std::move(g);
  }
  return out;
}

struct LorentzPair {
  double r = 1.0;    // > 0
  double rho = 1.0;  // > 0, or +inf for the weak space

  void validate() const {
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("LorentzPair: r must be finite and positive");
    if (!(rho > 0.0)) throw std::invalid_argument("LorentzPair: rho must be positive");
  }
};

// Deterministic uniform doubles: mt19937_64 bits mapped through (x >> 11) * 2^-53.
// std::uniform_real_distribution is implementation-defined, which would break
// byte-identical reports across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double uniform() {  // [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t next() {
    // xorshift64* keeps the stream identical on every platform.
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dull;
  }

 private:
  std::uint64_t state_;
};

// RS_THREADS caps worker counts; reductions stay serial either way so results
// do not depend on the cap.
inline int worker_cap() {
  if (const char* env = std::getenv("RS_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 1024) return static_cast<int>(v);
  }
  return 1;
}

}  // namespace sublin
