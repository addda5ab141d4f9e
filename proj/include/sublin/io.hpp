#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sublin/conditions.hpp"
#include "sublin/core.hpp"
#include "sublin/energy.hpp"
#include "sublin/estimates.hpp"
#include "sublin/kernels.hpp"
#include "sublin/potentials.hpp"
#include "sublin/solver.hpp"

namespace sublin::io {

namespace fs = std::filesystem;

// 17 significant digits: round-trips IEEE-754 doubles and keeps report files
// byte-identical across runs.
inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

// Temp-and-rename so readers never observe a half-written file.
inline void atomic_write(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

// Byte-order-independent little-endian codec (shifts act on values, not
// storage bytes).
inline void append_f64_le(std::string& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, 8);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.append(b, 8);
}

inline double parse_f64_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  double v = 0.0;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void expect_key(std::istream& in, const char* key) {
  std::string tok;
  if (!(in >> tok) || tok != key)
    throw std::runtime_error(std::string("expected field '") + key + "', found '" + tok + "'");
}

template <typename T>
inline T read_value(std::istream& in, const char* key) {
  T v{};
  if (!(in >> v)) throw std::runtime_error(std::string("cannot parse value of field '") + key + "'");
  return v;
}

}  // namespace detail

// GridFunction dump: raw little-endian f64 array (row-major) at `data_path`,
// structured-text header alongside at `data_path + ".hdr"`.
inline void write_grid_function(const GridFunction& u, const fs::path& data_path) {
  const BoxGrid& g = u.grid;
  std::string header;
  header += "dim " + std::to_string(g.dim) + "\n";
  header += "origin";
  for (int d = 0; d < g.dim; ++d) header += " " + fmt(g.origin[d]);
  header += "\nspacing " + fmt(g.spacing) + "\n";
  header += "shape";
  for (int d = 0; d < g.dim; ++d) header += " " + std::to_string(g.shape[d]);
  header += "\nvalues " + std::to_string(u.size()) + "\n";

  std::string data;
  data.reserve(8 * u.size());
  for (std::size_t i = 0; i < u.size(); ++i) detail::append_f64_le(data, u[i]);

  fs::path hdr = data_path;
  hdr += ".hdr";
  atomic_write(hdr, header);
  atomic_write(data_path, data);
}

inline GridFunction read_grid_function(const fs::path& data_path) {
  fs::path hdr = data_path;
  hdr += ".hdr";
  std::istringstream in(read_file(hdr));
  detail::expect_key(in, "dim");
  const int dim = detail::read_value<int>(in, "dim");
  if (dim < 1 || dim > 3) throw std::runtime_error("grid header: dim out of range");
  BoxGrid g;
  g.dim = dim;
  detail::expect_key(in, "origin");
  for (int d = 0; d < dim; ++d) g.origin[d] = detail::read_value<double>(in, "origin");
  detail::expect_key(in, "spacing");
  g.spacing = detail::read_value<double>(in, "spacing");
  detail::expect_key(in, "shape");
  for (int d = 0; d < dim; ++d) g.shape[d] = detail::read_value<int>(in, "shape");
  detail::expect_key(in, "values");
  const std::size_t count = detail::read_value<std::size_t>(in, "values");
  g.validate();
  if (count != g.cell_count()) throw std::runtime_error("grid header: values does not match shape");

  const std::string raw = read_file(data_path);
  if (raw.size() != 8 * count) throw std::runtime_error("grid data: byte length does not match header");
  GridFunction u(g, 0.0);
  for (std::size_t i = 0; i < count; ++i) u[i] = detail::parse_f64_le(raw.data() + 8 * i);
  u.validate();
  return u;
}

// Grid-backed potential fields reuse the grid dump; scattered fields have no
// canonical layout to serialize.
inline void write_potential_field(const potentials::PotentialField& f, const fs::path& data_path) {
  if (!f.grid) throw std::invalid_argument("write_potential_field: field is not grid-backed");
  GridFunction u(*f.grid, 0.0);
  if (f.values.size() != u.size()) throw std::invalid_argument("write_potential_field: value count mismatch");
  u.values = f.values;
  write_grid_function(u, data_path);
}

// Measure file: atom rows [x_1 ... x_n mass]; a trailing `density <file>` line
// references a grid dump (resolved relative to the measure file's directory).
inline void write_measure(const Measure& m, const fs::path& path) {
  std::string txt;
  txt += "dim " + std::to_string(m.dim) + "\n";
  txt += "atoms " + std::to_string(m.atoms.size()) + "\n";
  for (const auto& a : m.atoms) {
    for (int d = 0; d < m.dim; ++d) txt += (d ? " " : "") + fmt(a.loc[d]);
    txt += " " + fmt(a.mass) + "\n";
  }
  if (m.density) {
    fs::path dp = path;
    dp += ".density";
    write_grid_function(*m.density, dp);
    txt += "density " + dp.filename().string() + "\n";
  }
  atomic_write(path, txt);
}

inline Measure read_measure(const fs::path& path) {
  std::istringstream in(read_file(path));
  detail::expect_key(in, "dim");
  const int dim = detail::read_value<int>(in, "dim");
  if (dim < 1 || dim > 3) throw std::runtime_error("measure: dim out of range");
  detail::expect_key(in, "atoms");
  const std::size_t count = detail::read_value<std::size_t>(in, "atoms");
  Measure m;
  m.dim = dim;
  for (std::size_t i = 0; i < count; ++i) {
    Atom a;
    for (int d = 0; d < dim; ++d) a.loc[d] = detail::read_value<double>(in, "atom row");
    a.mass = detail::read_value<double>(in, "atom row");
    m.atoms.push_back(a);
  }
  std::string tok;
  if (in >> tok) {
    if (tok != "density") throw std::runtime_error("measure: unexpected field '" + tok + "'");
    const auto ref = detail::read_value<std::string>(in, "density");
    fs::path dp(ref);
    if (dp.is_relative()) dp = path.parent_path() / dp;
    m.density = read_grid_function(dp);
  }
  m.validate();
  return m;
}

// Square-matrix kernel file: point rows then the entry matrix.
//   dim n / points K / K rows of n coordinates / entries / K rows of K values
inline KernelSpec read_matrix_kernel(const fs::path& path) {
  std::istringstream in(read_file(path));
  detail::expect_key(in, "dim");
  const int dim = detail::read_value<int>(in, "dim");
  detail::expect_key(in, "points");
  const std::size_t count = detail::read_value<std::size_t>(in, "points");
  std::vector<Point> pts(count, Point{0, 0, 0});
  for (std::size_t i = 0; i < count; ++i)
    for (int d = 0; d < dim; ++d) pts[i][d] = detail::read_value<double>(in, "point row");
  detail::expect_key(in, "entries");
  std::vector<double> entries(count * count, 0.0);
  for (std::size_t i = 0; i < count * count; ++i) entries[i] = detail::read_value<double>(in, "entries");
  return make_matrix_kernel(dim, pts, entries);
}

inline void write_matrix_kernel(const MatrixKernel& mk, const fs::path& path) {
  std::string txt;
  txt += "dim " + std::to_string(mk.dim) + "\n";
  txt += "points " + std::to_string(mk.points.size()) + "\n";
  for (const auto& p : mk.points) {
    for (int d = 0; d < mk.dim; ++d) txt += (d ? " " : "") + fmt(p[d]);
    txt += "\n";
  }
  txt += "entries\n";
  const std::size_t k = mk.points.size();
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) txt += (j ? " " : "") + fmt(mk.entries[i * k + j]);
    txt += "\n";
  }
  atomic_write(path, txt);
}

inline std::string render_solve_report(const solver::SolveReport& r) {
  std::string txt;
  txt += "converged " + std::to_string(r.converged ? 1 : 0) + "\n";
  txt += "iterations " + std::to_string(r.iterate_count) + "\n";
  txt += "final_residual " + fmt(r.final_residual_fp) + "\n";
  txt += "monotonicity_violations " + std::to_string(r.monotonicity_violations) + "\n";
  txt += "conditions_ok " + std::to_string(r.conditions_ok ? 1 : 0) + "\n";
  txt += "q_max " + fmt(r.q_max) + "\n";
  txt += "c1_fitted " + fmt(r.c1_fitted) + "\n";
  txt += "c2 " + fmt(r.c2) + "\n";
  txt += "norm_bound " + fmt(r.norm_bound) + "\n";
  txt += "lorentz_norm " + fmt(r.lorentz_norm) + "\n";
  txt += "term_norms " + std::to_string(r.term_norms.size());
  for (double v : r.term_norms) txt += " " + fmt(v);
  txt += "\nresidual_history " + std::to_string(r.residual_history.size());
  for (double v : r.residual_history) txt += " " + fmt(v);
  txt += "\n";
  return txt;
}

inline std::string render_condition_report(const conditions::ConditionReport& r) {
  std::string txt;
  txt += "verdict " + std::to_string(r.verdict ? 1 : 0) + "\n";
  txt += "sigma_integrals " + std::to_string(r.sigma_integrals.size());
  for (double v : r.sigma_integrals) txt += " " + fmt(v);
  txt += "\nomega_integral " + fmt(r.omega_integral) + "\n";
  txt += "cross_integrals " + std::to_string(r.cross_integrals.size());
  for (double v : r.cross_integrals) txt += " " + fmt(v);
  txt += "\nexponents_valid " + std::to_string(r.exponents_valid ? 1 : 0) + "\n";
  if (r.exponents_valid) {
    txt += "solution_pair " + fmt(r.solution.r) + " " + fmt(r.solution.rho) + "\n";
    txt += "sufficient_terms " + std::to_string(r.sufficient_terms.size());
    for (const auto& p : r.sufficient_terms) txt += " " + fmt(p.r) + " " + fmt(p.rho);
    txt += "\nsufficient_omega " + fmt(r.sufficient_omega.r) + " " + fmt(r.sufficient_omega.rho) + "\n";
  }
  return txt;
}

inline std::string render_bracket_report(const estimates::BracketReport& r) {
  std::string txt;
  txt += "degenerate " + std::to_string(r.degenerate ? 1 : 0) + "\n";
  txt += "c_low " + fmt(r.c_low) + "\n";
  txt += "c_up " + fmt(r.c_up) + "\n";
  txt += "probes " + std::to_string(r.probes.size()) + "\n";
  for (std::size_t i = 0; i < r.probes.size(); ++i) {
    txt += fmt(r.probes[i][0]) + " " + fmt(r.probes[i][1]) + " " + fmt(r.probes[i][2]);
    txt += " " + fmt(r.bracket_values[i]) + "\n";
  }
  return txt;
}

inline std::string render_energy_report(const energy::EnergyReport& r) {
  std::string txt;
  txt += "seminorm_sq " + fmt(r.seminorm_sq) + "\n";
  txt += "rhs_identity " + fmt(r.rhs_identity) + "\n";
  txt += "relative_gap " + fmt(r.relative_gap) + "\n";
  txt += "boundary_warning " + std::to_string(r.boundary_warning ? 1 : 0) + "\n";
  if (r.gagliardo_sq) txt += "gagliardo_sq " + fmt(*r.gagliardo_sq) + "\n";
  return txt;
}

inline void write_solve_report(const solver::SolveReport& r, const fs::path& path) {
  atomic_write(path, render_solve_report(r));
}

inline void write_condition_report(const conditions::ConditionReport& r, const fs::path& path) {
  atomic_write(path, render_condition_report(r));
}

}  // namespace sublin::io
