#include "tatk/geometry.hpp"

#include <cmath>
#include <cstring>

namespace tatk {

namespace {

// Fibonacci lattice on the unit sphere; near-uniform, equal-weight.
std::array<double, 3> fib_point(int i, int count) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double z = 1.0 - (2.0 * i + 1.0) / count;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * pi * std::fmod(i / golden, 1.0);
  return {r * std::cos(phi), r * std::sin(phi), z};
}

}  // namespace

double AcquisitionGeometry::bounding_radius() const {
  double r2 = 0;
  for (const auto& p : pos)
    r2 = std::max(r2, sq(p[0] - center[0]) + sq(p[1] - center[1]) + sq(p[2] - center[2]));
  return std::sqrt(r2);
}

double AcquisitionGeometry::max_distance_to(const GridSpec& g) const {
  double m2 = 0;
  for (const auto& p : pos) {
    double d2 = 0;
    for (int a = 0; a < g.n; ++a) {
      const double lo = g.origin[a], hi = g.coord(a, g.shape[a] - 1);
      const double d = std::max(std::abs(p[a] - lo), std::abs(p[a] - hi));
      d2 += d * d;
    }
    m2 = std::max(m2, d2);
  }
  return std::sqrt(m2);
}

std::uint64_t AcquisitionGeometry::content_hash() const {
  std::uint64_t h = fnv1a(&n, sizeof n);
  const int k = static_cast<int>(kind);
  h = fnv1a(&k, sizeof k, h);
  if (!pos.empty()) h = fnv1a(pos.data(), pos.size() * sizeof(pos[0]), h);
  if (!normal.empty()) h = fnv1a(normal.data(), normal.size() * sizeof(normal[0]), h);
  if (!weight.empty()) h = fnv1a(weight.data(), weight.size() * sizeof(double), h);
  return h;
}

void AcquisitionGeometry::validate() const {
  require(n == 2 || n == 3, "geometry: dimension must be 2 or 3");
  require(!pos.empty(), "geometry: no detectors");
  require(pos.size() == normal.size() && pos.size() == weight.size(),
          "geometry: positions/normals/weights size mismatch");
  for (double w : weight) require(w > 0, "geometry: weights must be positive");
  for (const auto& nv : normal) {
    const double m = std::sqrt(sq(nv[0]) + sq(nv[1]) + sq(nv[2]));
    require(std::abs(m - 1.0) < 1e-9, "geometry: normals must be unit length");
  }
}

AcquisitionGeometry make_geometry(const GeometryParams& p) {
  AcquisitionGeometry g;
  g.n = p.n;
  g.kind = p.kind;
  g.center = p.center;

  switch (p.kind) {
    case GeometryKind::circle: {
      require(p.n == 2, "circle geometry is 2-D");
      require(p.count >= 3, "circle: need at least 3 detectors");
      require(p.radius > 0, "circle: radius must be positive");
      g.radius = p.radius;
      g.full_count = p.count;
      const double dth = 2.0 * pi / p.count;
      for (int i = 0; i < p.count; ++i) {
        const double th = p.theta0 + dth * i;
        const double c = std::cos(th), s = std::sin(th);
        g.pos.push_back({p.center[0] + p.radius * c, p.center[1] + p.radius * s, 0.0});
        g.normal.push_back({c, s, 0.0});
        g.weight.push_back(p.radius * dth);
      }
      g.theta0 = p.theta0;
      g.theta1 = p.theta0 + 2.0 * pi;
      break;
    }
    case GeometryKind::arc: {
      require(p.n == 2, "arc geometry is 2-D");
      require(p.count >= 2, "arc: need at least 2 detectors");
      require(p.radius > 0, "arc: radius must be positive");
      require(p.theta1 > p.theta0, "arc: empty angular range");
      require(p.theta1 - p.theta0 < 2.0 * pi + 1e-12, "arc: range exceeds full circle");
      g.radius = p.radius;
      g.theta0 = p.theta0;
      g.theta1 = p.theta1;
      const double dth = (p.theta1 - p.theta0) / (p.count - 1);
      g.full_count = static_cast<int>(std::lround(2.0 * pi / dth));
      for (int i = 0; i < p.count; ++i) {
        const double th = p.theta0 + dth * i;
        const double c = std::cos(th), s = std::sin(th);
        g.pos.push_back({p.center[0] + p.radius * c, p.center[1] + p.radius * s, 0.0});
        g.normal.push_back({c, s, 0.0});
        // trapezoid weights: endpoints get half a slot, total == arc length
        g.weight.push_back(p.radius * dth * ((i == 0 || i == p.count - 1) ? 0.5 : 1.0));
      }
      break;
    }
    case GeometryKind::sphere: {
      require(p.n == 3, "sphere geometry is 3-D");
      require(p.count >= 2, "sphere: need at least 2 detectors");
      require(p.radius > 0, "sphere: radius must be positive");
      g.radius = p.radius;
      const double w = 4.0 * pi * sq(p.radius) / p.count;
      for (int i = 0; i < p.count; ++i) {
        const auto u = fib_point(i, p.count);
        g.pos.push_back({p.center[0] + p.radius * u[0], p.center[1] + p.radius * u[1],
                         p.center[2] + p.radius * u[2]});
        g.normal.push_back(u);
        g.weight.push_back(w);
      }
      break;
    }
    case GeometryKind::cube_faces: {
      require(p.per_side >= 2, "cube_faces: need at least 2 detectors per side");
      g.box_lo = p.box_lo;
      g.box_hi = p.box_hi;
      g.per_side = p.per_side;
      for (int a = 0; a < p.n; ++a)
        require(p.box_hi[a] > p.box_lo[a], "cube_faces: empty box");
      const int m = p.per_side;
      if (p.n == 2) {
        // four sides, detectors at cell centers
        for (int axis = 0; axis < 2; ++axis) {
          const int other = 1 - axis;
          const double len = p.box_hi[other] - p.box_lo[other];
          const double w = len / m;
          for (int side = 0; side < 2; ++side) {
            const double fixed = side ? p.box_hi[axis] : p.box_lo[axis];
            for (int i = 0; i < m; ++i) {
              const double t = p.box_lo[other] + (i + 0.5) * w;
              std::array<double, 3> pos{0, 0, 0}, nrm{0, 0, 0};
              pos[axis] = fixed;
              pos[other] = t;
              nrm[axis] = side ? 1.0 : -1.0;
              g.pos.push_back(pos);
              g.normal.push_back(nrm);
              g.weight.push_back(w);
            }
          }
        }
      } else {
        for (int axis = 0; axis < 3; ++axis) {
          const int u = (axis + 1) % 3, v = (axis + 2) % 3;
          const double lu = p.box_hi[u] - p.box_lo[u];
          const double lv = p.box_hi[v] - p.box_lo[v];
          const double w = (lu / m) * (lv / m);
          for (int side = 0; side < 2; ++side) {
            const double fixed = side ? p.box_hi[axis] : p.box_lo[axis];
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < m; ++j) {
                std::array<double, 3> pos{0, 0, 0}, nrm{0, 0, 0};
                pos[axis] = fixed;
                pos[u] = p.box_lo[u] + (i + 0.5) * (lu / m);
                pos[v] = p.box_lo[v] + (j + 0.5) * (lv / m);
                nrm[axis] = side ? 1.0 : -1.0;
                g.pos.push_back(pos);
                g.normal.push_back(nrm);
                g.weight.push_back(w);
              }
          }
        }
      }
      // center of the box, used for bounding radii
      for (int a = 0; a < 3; ++a) g.center[a] = 0.5 * (p.box_lo[a] + p.box_hi[a]);
      break;
    }
    case GeometryKind::custom: {
      require(!p.positions.empty(), "custom geometry: no detectors");
      require(p.positions.size() == p.normals.size() &&
                  p.positions.size() == p.weights.size(),
              "custom geometry: array size mismatch");
      g.pos = p.positions;
      g.normal = p.normals;
      g.weight = p.weights;
      break;
    }
  }
  g.validate();
  return g;
}

}  // namespace tatk
