// Writes the density-measure fixtures the end-to-end CLI test drives the
// binary with. Usage: make_fixtures <out_dir>

#include <cstdio>
#include <filesystem>
#include <string>

#include "sublin/io.hpp"
#include "sublin/kernels.hpp"

using namespace sublin;

namespace {

Measure bump(const BoxGrid& g, double cx, double cy, double width, double height) {
  Measure m;
  m.dim = 2;
  GridFunction d(g, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Point c = g.cell_center(i);
    const double r2 = (c[0] - cx) * (c[0] - cx) + (c[1] - cy) * (c[1] - cy);
    if (r2 < width * width) d[i] = height * (1.0 - r2 / (width * width));
  }
  m.density = d;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out_dir>\n", argv[0]);
    return 1;
  }
  const std::filesystem::path out = argv[1];
  std::filesystem::create_directories(out);

  BoxGrid g;
  g.dim = 2;
  g.origin = {-2.0, -2.0, 0.0};
  g.spacing = 0.0625;
  g.shape = {64, 64, 1};

  io::write_measure(bump(g, -0.2, 0.1, 0.5, 1.0), out / "sigma_bump.measure");
  io::write_measure(bump(g, 0.4, -0.3, 0.3, 0.5), out / "omega_bump.measure");
  io::write_measure(bump(g, 0.0, 0.0, 0.3, 1.0), out / "omega_dual.measure");
  return 0;
}
