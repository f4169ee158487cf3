#pragma once
// Shared test fixtures: analytic transforms of Gaussians, brute-force
// quadrature oracles, random fields and error norms. Everything here is an
// independent route to the quantities the library computes — keep these free
// of library calls unless a test is explicitly a cross-check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "tatk/data.hpp"
#include "tatk/field.hpp"
#include "tatk/geometry.hpp"
#include "tatk/grid.hpp"

namespace tt {

using tatk::pi;

// ---- analytic spherical means of a centered Gaussian e^{-|x|^2/s2} ---------

// 3D: mean over the sphere |x - y| = r with d = |y|.
inline double gauss3_mean(double d, double r, double s2) {
  const double a = 2.0 * d * r / s2;
  const double shc = a < 1e-8 ? 1.0 + a * a / 6.0 : std::sinh(a) / a;
  return std::exp(-(d * d + r * r) / s2) * shc;
}

// 2D: mean over the circle |x - y| = r.
inline double gauss2_mean(double d, double r, double s2) {
  const double a = 2.0 * d * r / s2;
  return std::exp(-(d * d + r * r) / s2) * std::cyl_bessel_i(0.0, a);
}

// ---- brute-force spherical integral oracles --------------------------------

// 2D: integral-convention value  r * sum f(y + r w) dtheta  by an M-node
// uniform trapezoid on the circle.
inline double circle_integral_oracle(const std::function<double(double, double)>& f,
                                     double yx, double yy, double r, int M) {
  double s = 0;
  for (int k = 0; k < M; ++k) {
    const double th = 2.0 * pi * k / M;
    s += f(yx + r * std::cos(th), yy + r * std::sin(th));
  }
  return s * (2.0 * pi / M) * r;
}

// 3D: integral-convention value  r^2 * int f dS  by a Gauss-Legendre x
// trapezoid product rule (nodes in polar/azimuthal angle).
double sphere_integral_oracle(const std::function<double(double, double, double)>& f,
                              const std::array<double, 3>& y, double r, int n_polar);

// ---- fields -----------------------------------------------------------------

inline tatk::ScalarField sample_field(
    const tatk::GridSpec& g,
    const std::function<double(double, double, double)>& f) {
  tatk::ScalarField out(g);
  for (int iz = 0; iz < g.shape[2]; ++iz)
    for (int iy = 0; iy < g.shape[1]; ++iy)
      for (int ix = 0; ix < g.shape[0]; ++ix)
        out.at(ix, iy, iz) =
            f(g.coord(0, ix), g.coord(1, iy), g.n == 3 ? g.coord(2, iz) : 0.0);
  return out;
}

inline tatk::ScalarField random_field(const tatk::GridSpec& g, std::uint64_t seed,
                                      double amp = 1.0) {
  tatk::ScalarField out(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  for (double& v : out.v) v = u(rng);
  return out;
}

// ---- geometries and analytic sinograms --------------------------------------

inline tatk::AcquisitionGeometry circle_geom(int count, double R) {
  tatk::GeometryParams p;
  p.kind = tatk::GeometryKind::circle;
  p.n = 2;
  p.radius = R;
  p.count = count;
  return tatk::make_geometry(p);
}

inline tatk::AcquisitionGeometry sphere_geom(int count, double R) {
  tatk::GeometryParams p;
  p.kind = tatk::GeometryKind::sphere;
  p.n = 3;
  p.radius = R;
  p.count = count;
  return tatk::make_geometry(p);
}

inline tatk::AcquisitionGeometry square_sides_geom(double lo, double hi, int per_side) {
  tatk::GeometryParams p;
  p.kind = tatk::GeometryKind::cube_faces;
  p.n = 2;
  p.box_lo = {lo, lo, 0};
  p.box_hi = {hi, hi, 0};
  p.per_side = per_side;
  return tatk::make_geometry(p);
}

// Circle integral of the indicator of a disk (radius a, center distance d from
// the circle center), times r: the exact integral-convention datum in 2-D.
inline double disk_arc_integral(double d, double r, double a) {
  if (r <= 0) return 0.0;
  if (r + d <= a) return 2.0 * pi * r;       // circle entirely inside the disk
  if (r >= d + a || r + a <= d) return 0.0;  // no intersection
  const double c = std::clamp((d * d + r * r - a * a) / (2.0 * d * r), -1.0, 1.0);
  return 2.0 * std::acos(c) * r;
}

inline tatk::SphericalSinogram disk_sinogram(const tatk::AcquisitionGeometry& geom,
                                             int nr, double rmax, double cx, double cy,
                                             double a, double amp) {
  tatk::SphericalSinogram s(geom, nr, rmax / (nr - 1));
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const double d = std::hypot(geom.pos[i][0] - cx, geom.pos[i][1] - cy);
    for (int j = 0; j < nr; ++j) s.at(i, j) = amp * disk_arc_integral(d, j * s.dr, a);
  }
  return s;
}

// Integral-convention sinogram of exp(-|x|^2/s2) from the analytic means.
inline tatk::SphericalSinogram gauss_sinogram(const tatk::AcquisitionGeometry& geom,
                                              int nr, double rmax, double s2) {
  tatk::SphericalSinogram s(geom, nr, rmax / (nr - 1));
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const auto& p = geom.pos[i];
    const double d = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    for (int j = 1; j < nr; ++j) {
      const double r = j * s.dr;
      s.at(i, j) = geom.n == 2 ? 2.0 * pi * r * gauss2_mean(d, r, s2)
                               : 4.0 * pi * r * r * gauss3_mean(d, r, s2);
    }
  }
  return s;
}

inline tatk::SphericalSinogram random_sinogram(const tatk::AcquisitionGeometry& geom,
                                               int nr, double dr, std::uint64_t seed) {
  tatk::SphericalSinogram s(geom, nr, dr);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : s.g) x = u(rng);
  return s;
}

// ---- norms ------------------------------------------------------------------

inline double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Gauss-Legendre nodes/weights on [-1, 1] (Newton on Legendre recurrence);
// independent of the library's quadrature helpers.
void gauss_nodes(int m, std::vector<double>& x, std::vector<double>& w);

}  // namespace tt
