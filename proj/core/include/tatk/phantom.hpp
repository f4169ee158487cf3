#pragma once
// Piecewise-constant phantoms: additive unions of balls/disks, ellipses and
// boxes, hard-edged by default with an optional edge-mollification width so
// smoothness-dependent tests have a smooth variant of the same scene.

#include <string>
#include <vector>

#include "tatk/field.hpp"

namespace tatk {

enum class PrimitiveShape { ball, ellipse, box };

struct PhantomPrimitive {
  PrimitiveShape shape = PrimitiveShape::ball;
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> semi_axes{0.5, 0.5, 0.5};  // ball uses semi_axes[0] as radius
  double angle = 0.0;  // 2-D in-plane rotation (ellipse/box)
  double amplitude = 1.0;
};

struct PhantomSpec {
  int n = 2;
  std::vector<PhantomPrimitive> primitives;
  double mollify_width = 0.0;  // 0 => hard edges

  // Pointwise evaluation; the transition straddles each primitive boundary
  // over +-mollify_width/2 (C1 cosine ramp in signed distance).
  double value(double x, double y, double z = 0.0) const;

  void validate() const;
};

ScalarField make_phantom(const PhantomSpec& spec, const GridSpec& grid);

// Radius of a ball about the coordinate origin containing the support
// (mollification ramp included); 0 for an empty scene.
double support_radius(const PhantomSpec& spec);

// Scene used throughout the tests: a handful of disks of differing amplitude
// inside the unit disk (2-D) or unit ball (3-D).
PhantomSpec standard_scene(int n, double mollify = 0.0);

}  // namespace tatk
