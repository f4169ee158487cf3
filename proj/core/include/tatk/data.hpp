#pragma once
// Data containers. A SphericalSinogram stores, per detector y and radius r,
// either the spherical surface integral of f over the sphere |x-y| = r
// (the canonical "integral" convention) or the surface mean. SensorData
// stores pressure traces p(y, t) on a uniform time grid starting at t = 0.

#include <vector>

#include "tatk/geometry.hpp"

namespace tatk {

enum class RadialConvention { integral, mean };

inline double unit_sphere_area(int n) { return n == 2 ? 2.0 * pi : 4.0 * pi; }

struct SphericalSinogram {
  AcquisitionGeometry geom;
  int nr = 0;
  double dr = 0;  // radii r_j = j * dr, j = 0..nr-1
  RadialConvention conv = RadialConvention::integral;
  std::vector<double> g;  // detector-major: g[i*nr + j]

  SphericalSinogram() = default;
  SphericalSinogram(const AcquisitionGeometry& gm, int nradii, double drr,
                    RadialConvention c = RadialConvention::integral)
      : geom(gm), nr(nradii), dr(drr), conv(c),
        g(gm.size() * static_cast<std::size_t>(nradii), 0.0) {
    require(nradii >= 2, "sinogram: need at least 2 radii");
    require(drr > 0, "sinogram: radial spacing must be positive");
  }

  double r_max() const { return dr * (nr - 1); }
  double* row(std::size_t det) { return g.data() + det * nr; }
  const double* row(std::size_t det) const { return g.data() + det * nr; }
  double& at(std::size_t det, int j) { return g[det * nr + j]; }
  double at(std::size_t det, int j) const { return g[det * nr + j]; }

  bool finite() const {
    for (double x : g)
      if (!std::isfinite(x)) return false;
    return true;
  }

  // Convention conversions: integral = mean * r^{n-1} * |S^{n-1}|.
  // The mean at r = 0 is filled by quadratic extrapolation from r_1..r_3
  // (the integral convention stores an exact 0 there).
  SphericalSinogram to_convention(RadialConvention target) const;

  void validate() const {
    geom.validate();
    require(nr >= 2 && dr > 0, "sinogram: bad radial grid");
    require(g.size() == geom.size() * static_cast<std::size_t>(nr),
            "sinogram: payload size mismatch");
    require(finite(), "sinogram: non-finite samples");
  }
};

struct SensorData {
  AcquisitionGeometry geom;
  int nt = 0;
  double dt = 0;  // times t_k = k * dt
  std::vector<double> p;  // detector-major: p[i*nt + k]

  SensorData() = default;
  SensorData(const AcquisitionGeometry& gm, int ntimes, double dtt)
      : geom(gm), nt(ntimes), dt(dtt),
        p(gm.size() * static_cast<std::size_t>(ntimes), 0.0) {
    require(ntimes >= 2, "sensor data: need at least 2 samples");
    require(dtt > 0, "sensor data: time step must be positive");
  }

  double t_max() const { return dt * (nt - 1); }
  double* row(std::size_t det) { return p.data() + det * nt; }
  const double* row(std::size_t det) const { return p.data() + det * nt; }
  double& at(std::size_t det, int k) { return p[det * nt + k]; }
  double at(std::size_t det, int k) const { return p[det * nt + k]; }

  double sample(std::size_t det, double t) const {  // linear in t, 0 outside
    if (t < 0) return 0;
    const double ft = t / dt;
    if (ft >= nt - 1) return p[det * nt + nt - 1];
    const int k = static_cast<int>(ft);
    const double a = ft - k;
    return (1 - a) * p[det * nt + k] + a * p[det * nt + k + 1];
  }

  bool finite() const {
    for (double x : p)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void validate() const {
    geom.validate();
    require(nt >= 2 && dt > 0, "sensor data: bad time grid");
    require(p.size() == geom.size() * static_cast<std::size_t>(nt),
            "sensor data: payload size mismatch");
    require(finite(), "sensor data: non-finite samples");
  }
};

// Adds zero-mean Gaussian noise rescaled so the achieved L2 perturbation is
// exactly `level` (||noisy - clean|| == level * ||clean||). Deterministic for
// a fixed seed. Returns the achieved fraction (== level, or 0 on zero data).
double add_noise(std::vector<double>& samples, double level, std::uint64_t seed);
double add_noise(SphericalSinogram& s, double level, std::uint64_t seed);
double add_noise(SensorData& s, double level, std::uint64_t seed);

}  // namespace tatk
