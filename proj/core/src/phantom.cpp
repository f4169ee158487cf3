#include "tatk/phantom.hpp"

#include <cmath>

namespace tatk {

namespace {

// signed distance to the primitive boundary, positive inside
double signed_distance(const PhantomPrimitive& p, int n, double x, double y, double z) {
  double dx = x - p.center[0], dy = y - p.center[1], dz = z - p.center[2];
  if (n == 2) dz = 0;
  switch (p.shape) {
    case PrimitiveShape::ball: {
      const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      return p.semi_axes[0] - r;
    }
    case PrimitiveShape::ellipse: {
      if (p.angle != 0.0) {
        const double c = std::cos(-p.angle), s = std::sin(-p.angle);
        const double rx = c * dx - s * dy, ry = s * dx + c * dy;
        dx = rx;
        dy = ry;
      }
      double q = sq(dx / p.semi_axes[0]) + sq(dy / p.semi_axes[1]);
      double amin = std::min(p.semi_axes[0], p.semi_axes[1]);
      if (n == 3) {
        q += sq(dz / p.semi_axes[2]);
        amin = std::min(amin, p.semi_axes[2]);
      }
      // scaled algebraic distance; exact at the boundary, adequate for a
      // small mollification band
      return (1.0 - std::sqrt(q)) * amin;
    }
    case PrimitiveShape::box: {
      if (p.angle != 0.0) {
        const double c = std::cos(-p.angle), s = std::sin(-p.angle);
        const double rx = c * dx - s * dy, ry = s * dx + c * dy;
        dx = rx;
        dy = ry;
      }
      double m = p.semi_axes[0] - std::abs(dx);
      m = std::min(m, p.semi_axes[1] - std::abs(dy));
      if (n == 3) m = std::min(m, p.semi_axes[2] - std::abs(dz));
      return m;
    }
  }
  return -1.0;
}

}  // namespace

void PhantomSpec::validate() const {
  require(n == 2 || n == 3, "phantom: dimension must be 2 or 3");
  require(mollify_width >= 0, "phantom: mollify width must be >= 0");
  for (const auto& p : primitives) {
    require(p.semi_axes[0] > 0, "phantom: primitive size must be positive");
    if (p.shape != PrimitiveShape::ball) {
      require(p.semi_axes[1] > 0, "phantom: primitive size must be positive");
      if (n == 3) require(p.semi_axes[2] > 0, "phantom: primitive size must be positive");
    }
  }
}

double PhantomSpec::value(double x, double y, double z) const {
  double s = 0;
  const double w = mollify_width;
  for (const auto& p : primitives) {
    const double d = signed_distance(p, n, x, y, z);
    if (w <= 0) {
      if (d >= 0) s += p.amplitude;
    } else {
      const double t = (d + 0.5 * w) / w;
      if (t >= 1)
        s += p.amplitude;
      else if (t > 0)
        s += p.amplitude * 0.5 * (1.0 - std::cos(pi * t));
    }
  }
  return s;
}

ScalarField make_phantom(const PhantomSpec& spec, const GridSpec& grid) {
  spec.validate();
  grid.validate();
  require(spec.n == grid.n, "make_phantom: dimension mismatch");
  // every primitive's support (plus the mollification band) must lie inside
  // the grid box; report the offending extents explicitly
  for (std::size_t k = 0; k < spec.primitives.size(); ++k) {
    const auto& p = spec.primitives[k];
    const double c = std::cos(p.angle), s = std::sin(p.angle);
    for (int a = 0; a < grid.n; ++a) {
      double ext = p.semi_axes[0];
      if (p.shape == PrimitiveShape::ellipse && a < 2)
        ext = std::sqrt(sq(p.semi_axes[0] * (a == 0 ? c : s)) +
                        sq(p.semi_axes[1] * (a == 0 ? s : c)));
      else if (p.shape == PrimitiveShape::ellipse)
        ext = p.semi_axes[2];
      else if (p.shape == PrimitiveShape::box)
        ext = a < 2 ? std::abs(p.semi_axes[0] * (a == 0 ? c : s)) +
                          std::abs(p.semi_axes[1] * (a == 0 ? s : c))
                    : p.semi_axes[2];
      ext += 0.5 * spec.mollify_width;
      const double lo = p.center[a] - ext, hi = p.center[a] + ext;
      const double glo = grid.origin[a];
      const double ghi = grid.origin[a] + (grid.shape[a] - 1) * grid.spacing[a];
      require(lo >= glo - 1e-12 && hi <= ghi + 1e-12,
              "make_phantom: primitive " + std::to_string(k) + " spans [" +
                  std::to_string(lo) + ", " + std::to_string(hi) + "] on axis " +
                  std::to_string(a) + " but the grid covers [" +
                  std::to_string(glo) + ", " + std::to_string(ghi) + "]");
    }
  }
  ScalarField f(grid);
  for (int iz = 0; iz < grid.shape[2]; ++iz)
    for (int iy = 0; iy < grid.shape[1]; ++iy)
      for (int ix = 0; ix < grid.shape[0]; ++ix)
        f.at(ix, iy, iz) =
            spec.value(grid.coord(0, ix), grid.coord(1, iy), grid.coord(2, iz));
  return f;
}

double support_radius(const PhantomSpec& spec) {
  double s = 0;
  for (const auto& p : spec.primitives) {
    const double off =
        std::sqrt(sq(p.center[0]) + sq(p.center[1]) + sq(p.center[2]));
    double ext = 0;
    switch (p.shape) {
      case PrimitiveShape::ball:
        ext = p.semi_axes[0];
        break;
      case PrimitiveShape::ellipse:
        ext = std::max(p.semi_axes[0], p.semi_axes[1]);
        if (spec.n == 3) ext = std::max(ext, p.semi_axes[2]);
        break;
      case PrimitiveShape::box:
        ext = std::sqrt(sq(p.semi_axes[0]) + sq(p.semi_axes[1]) +
                        (spec.n == 3 ? sq(p.semi_axes[2]) : 0.0));
        break;
    }
    s = std::max(s, off + ext);
  }
  return s == 0 ? 0 : s + 0.5 * spec.mollify_width;
}

PhantomSpec standard_scene(int n, double mollify) {
  PhantomSpec s;
  s.n = n;
  s.mollify_width = mollify;
  if (n == 2) {
    s.primitives.push_back({PrimitiveShape::ball, {0.0, 0.0, 0}, {0.55, 0, 0}, 0, 1.0});
    s.primitives.push_back({PrimitiveShape::ball, {-0.28, 0.25, 0}, {0.18, 0, 0}, 0, 0.6});
    s.primitives.push_back({PrimitiveShape::ball, {0.30, -0.22, 0}, {0.14, 0, 0}, 0, -0.5});
    s.primitives.push_back({PrimitiveShape::ball, {0.18, 0.38, 0}, {0.10, 0, 0}, 0, 0.8});
    s.primitives.push_back({PrimitiveShape::ball, {-0.35, -0.45, 0}, {0.12, 0, 0}, 0, 0.7});
  } else {
    s.primitives.push_back({PrimitiveShape::ball, {0.0, 0.0, 0.0}, {0.5, 0, 0}, 0, 1.0});
    s.primitives.push_back({PrimitiveShape::ball, {-0.25, 0.2, 0.1}, {0.16, 0, 0}, 0, 0.6});
    s.primitives.push_back({PrimitiveShape::ball, {0.25, -0.2, -0.15}, {0.13, 0, 0}, 0, -0.5});
  }
  return s;
}

}  // namespace tatk
