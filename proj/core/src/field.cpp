#include "tatk/field.hpp"

#include <algorithm>
#include <cmath>

namespace tatk {

double ScalarField::interp(double x, double y, double z, double outside) const {
  const auto& g = grid;
  const double fx = (x - g.origin[0]) / g.spacing[0];
  const double fy = (y - g.origin[1]) / g.spacing[1];
  if (fx < 0 || fy < 0 || fx > g.shape[0] - 1 || fy > g.shape[1] - 1) return outside;
  int ix = static_cast<int>(fx), iy = static_cast<int>(fy);
  ix = std::min(ix, g.shape[0] - 2);
  iy = std::min(iy, g.shape[1] - 2);
  const double ax = fx - ix, ay = fy - iy;

  if (g.n == 2) {
    const std::size_t i00 = g.index(ix, iy);
    const double v00 = v[i00], v10 = v[i00 + 1];
    const double v01 = v[i00 + g.shape[0]], v11 = v[i00 + g.shape[0] + 1];
    return (1 - ax) * ((1 - ay) * v00 + ay * v01) + ax * ((1 - ay) * v10 + ay * v11);
  }

  const double fz = (z - g.origin[2]) / g.spacing[2];
  if (fz < 0 || fz > g.shape[2] - 1) return outside;
  int iz = static_cast<int>(fz);
  iz = std::min(iz, g.shape[2] - 2);
  const double az = fz - iz;
  const std::size_t sxy = static_cast<std::size_t>(g.shape[0]) * g.shape[1];
  const std::size_t i000 = g.index(ix, iy, iz);
  auto lerp2 = [&](std::size_t base) {
    const double v00 = v[base], v10 = v[base + 1];
    const double v01 = v[base + g.shape[0]], v11 = v[base + g.shape[0] + 1];
    return (1 - ax) * ((1 - ay) * v00 + ay * v01) + ax * ((1 - ay) * v10 + ay * v11);
  };
  return (1 - az) * lerp2(i000) + az * lerp2(i000 + sxy);
}

double ScalarField::min_value() const {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

double ScalarField::max_value() const {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

bool ScalarField::finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double ScalarField::l2() const {
  double s = 0;
  for (double x : v) s += x * x;
  double hveol = 1;
  for (int a = 0; a < grid.n; ++a) hveol *= grid.spacing[a];
  return std::sqrt(s * hveol);
}

double rel_l2_error(const ScalarField& a, const ScalarField& reference) {
  require(a.grid == reference.grid, "rel_l2_error: grids differ");
  return rel_l2(a.v, reference.v);
}

}  // namespace tatk
