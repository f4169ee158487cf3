#pragma once
// ScalarField: node-sampled values on a GridSpec, with bi/trilinear sampling.
// SoundSpeedField: a positive field with a constant background outside a
// stated support radius, so solvers can extend it to larger boxes.

#include <vector>

#include "tatk/grid.hpp"

namespace tatk {

struct ScalarField {
  GridSpec grid;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0)
      : grid(g), v(g.size(), fill) {}

  double& at(int ix, int iy, int iz = 0) { return v[grid.index(ix, iy, iz)]; }
  double at(int ix, int iy, int iz = 0) const { return v[grid.index(ix, iy, iz)]; }

  // Bi/trilinear interpolation; returns `outside` beyond the grid hull.
  double interp(double x, double y, double z = 0.0, double outside = 0.0) const;

  double min_value() const;
  double max_value() const;
  bool finite() const;  // no NaN/Inf anywhere

  // l2 norm weighted by the cell volume (h^n), the discrete L2 norm.
  double l2() const;
};

// Relative L2 distance between two fields on the same grid.
double rel_l2_error(const ScalarField& a, const ScalarField& reference);

struct SoundSpeedField {
  ScalarField field;          // sampled speed; may be empty for a constant speed
  double background = 1.0;    // value outside the support radius
  double support_radius = 0;  // |x - support_center| beyond which c == background
  std::array<double, 3> support_center{0, 0, 0};

  static SoundSpeedField constant(double c) {
    require(c > 0, "SoundSpeedField: speed must be positive");
    SoundSpeedField s;
    s.background = c;
    return s;
  }

  bool is_constant() const { return field.v.empty(); }

  void validate() const {
    require(background > 0, "SoundSpeedField: background must be positive");
    if (!is_constant()) {
      require(field.finite(), "SoundSpeedField: non-finite values");
      require(field.min_value() > 0, "SoundSpeedField: speed must be positive");
    }
  }

  double value(double x, double y, double z = 0.0) const {
    if (is_constant()) return background;
    const double dx = x - support_center[0], dy = y - support_center[1],
                 dz = z - support_center[2];
    if (support_radius > 0 && dx * dx + dy * dy + dz * dz > sq(support_radius))
      return background;
    return field.interp(x, y, z, background);
  }

  double min_speed() const {
    if (is_constant()) return background;
    return std::min(background, field.min_value());
  }
  double max_speed() const {
    if (is_constant()) return background;
    return std::max(background, field.max_value());
  }
};

}  // namespace tatk
