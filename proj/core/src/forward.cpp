#include "tatk/forward.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tatk {
namespace {

// Fibonacci sphere lattice (same layout geometry.cpp uses for detector grids).
std::array<double, 3> sphere_node(int i, int count) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double z = 1.0 - (2.0 * i + 1.0) / count;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * pi * std::fmod(i / golden, 1.0);
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

}  // namespace

int sphere_quadrature_nodes(int n, double r, double h, double quality) {
  require(quality > 0, "sphere quadrature: quality must be positive");
  const double s = r / h;
  if (n == 2) {
    const double want = 8.0 * quality * std::max(1.0, 2.0 * pi * s);
    return static_cast<int>(std::min(2.0e6, std::max(32.0, std::ceil(want))));
  }
  const double want = 6.0 * quality * std::max(1.0, s * s);
  return static_cast<int>(std::min(4.0e6, std::max(128.0, std::ceil(want))));
}

double sphere_mean_quadrature(const std::function<double(double, double, double)>& f,
                              int n, const std::array<double, 3>& center, double r,
                              int nodes) {
  require(nodes >= 4, "sphere quadrature: too few nodes");
  double sum = 0;
  if (n == 2) {
    for (int k = 0; k < nodes; ++k) {
      const double th = 2.0 * pi * k / nodes;
      sum += f(center[0] + r * std::cos(th), center[1] + r * std::sin(th), 0.0);
    }
  } else {
    for (int k = 0; k < nodes; ++k) {
      const auto w = sphere_node(k, nodes);
      sum += f(center[0] + r * w[0], center[1] + r * w[1], center[2] + r * w[2]);
    }
  }
  return sum / nodes;
}

SphericalSinogram spherical_mean_transform(const ScalarField& f,
                                           const AcquisitionGeometry& geom, int nr,
                                           double rmax, RadialConvention conv,
                                           double quality, int threads,
                                           long* outside_nodes) {
  require(nr >= 2 && rmax > 0, "spherical_mean_transform: bad radial grid");
  require(geom.n == f.grid.n, "spherical_mean_transform: dimension mismatch");
  geom.validate();
  const double dr = rmax / (nr - 1);
  const double h = f.grid.min_spacing();
  const GridSpec& G = f.grid;
  const double x0 = G.origin[0], x1 = G.coord(0, G.shape[0] - 1);
  const double y0 = G.origin[1], y1 = G.coord(1, G.shape[1] - 1);
  const double z0 = G.n == 3 ? G.origin[2] : 0,
               z1 = G.n == 3 ? G.coord(2, G.shape[2] - 1) : 0;
  SphericalSinogram out(geom, nr, dr, RadialConvention::mean);
  std::vector<long> missed(geom.size(), 0);

  parallel_for(0, static_cast<int>(geom.size()), threads, [&](int i) {
    const auto& y = geom.pos[i];
    double* row = out.row(i);
    row[0] = f.interp(y[0], y[1], y[2]);  // mean over the degenerate sphere
    for (int j = 1; j < nr; ++j) {
      const double r = j * dr;
      const int nodes = sphere_quadrature_nodes(geom.n, r, h, quality);
      double sum = 0;
      if (geom.n == 2) {
        const double dth = 2.0 * pi / nodes;
        for (int k = 0; k < nodes; ++k) {
          const double th = dth * k;
          const double px = y[0] + r * std::cos(th), py = y[1] + r * std::sin(th);
          if (px < x0 || px > x1 || py < y0 || py > y1)
            ++missed[i];
          else
            sum += f.interp(px, py);
        }
      } else {
        for (int k = 0; k < nodes; ++k) {
          const auto w = sphere_node(k, nodes);
          const double px = y[0] + r * w[0], py = y[1] + r * w[1],
                       pz = y[2] + r * w[2];
          if (px < x0 || px > x1 || py < y0 || py > y1 || pz < z0 || pz > z1)
            ++missed[i];
          else
            sum += f.interp(px, py, pz);
        }
      }
      row[j] = sum / nodes;
    }
  });

  if (outside_nodes) {
    long total = 0;
    for (long m : missed) total += m;
    *outside_nodes = total;
  }
  if (conv == RadialConvention::mean) return out;
  return out.to_convention(RadialConvention::integral);
}

// --- FDTD --------------------------------------------------------------------

namespace {

struct FdtdBox {
  GridSpec grid;
  double dt = 0;
  int nt = 0;
};

FdtdBox plan_fdtd(const ScalarField& f, const SoundSpeedField& c,
                  const AcquisitionGeometry& geom, double T, const FdtdOptions& opts) {
  const GridSpec& g = f.grid;
  const int n = g.n;
  const double h = g.min_spacing();
  for (int a = 0; a < n; ++a)
    require(std::abs(g.spacing[a] - h) <= 1e-12 * h,
            "fdtd: grid spacing must be equal along all axes");
  require(T > 0, "fdtd: need T > 0");
  const double cmax = c.max_speed();

  // Walls are Dirichlet; anything that reflects off them must not be able to
  // travel wall -> detector within [0, T], so keep every wall strictly
  // farther than T*cmax/2 from every detector (and from the initial support).
  const double margin = 0.5 * T * cmax + 4.0 * h + opts.extra_margin;
  GridSpec box = g;
  for (int a = 0; a < n; ++a) {
    double lo = g.origin[a], hi = g.coord(a, g.shape[a] - 1);
    double need_lo = lo, need_hi = hi;
    for (const auto& y : geom.pos) {
      need_lo = std::min(need_lo, y[a]);
      need_hi = std::max(need_hi, y[a]);
    }
    need_lo -= margin;
    need_hi += margin;
    const int add_lo = static_cast<int>(std::ceil((lo - need_lo) / h - 1e-12));
    const int add_hi = static_cast<int>(std::ceil((need_hi - hi) / h - 1e-12));
    box.origin[a] = lo - add_lo * h;
    box.shape[a] = g.shape[a] + add_lo + add_hi;
  }
  box.validate();

  const double limit = h / (cmax * std::sqrt(static_cast<double>(n)));
  double dt;
  int nt;
  if (opts.dt > 0) {
    require(opts.dt <= limit * (1 + 1e-9), "fdtd: dt violates the CFL limit");
    dt = opts.dt;
    nt = static_cast<int>(std::ceil(T / dt - 1e-9)) + 1;
  } else {
    require(opts.cfl > 0 && opts.cfl <= 1, "fdtd: cfl must be in (0, 1]");
    nt = static_cast<int>(std::ceil(T / (opts.cfl * limit) - 1e-9)) + 1;
    dt = T / (nt - 1);  // land exactly on T, still within the limit
  }
  return {box, dt, nt};
}

}  // namespace

void fdtd_simulate(const ScalarField& f, const SoundSpeedField& c,
                   const AcquisitionGeometry& geom, double T, const FdtdOptions& opts,
                   const std::function<void(int, double, const ScalarField&,
                                            const ScalarField&, double)>& on_step) {
  f.grid.validate();
  c.validate();
  require(f.finite(), "fdtd: non-finite initial state");
  const FdtdBox plan = plan_fdtd(f, c, geom, T, opts);
  const GridSpec& b = plan.grid;
  const int n = b.n;
  const double h = b.spacing[0];
  const double dt = plan.dt;
  const int nx = b.shape[0], ny = b.shape[1], nz = b.shape[2];

  // c^2 at box nodes (constant outside the stated support).
  std::vector<double> c2(b.size());
  for (int iz = 0; iz < nz; ++iz)
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix)
        c2[b.index(ix, iy, iz)] =
            sq(c.value(b.coord(0, ix), b.coord(1, iy), n == 3 ? b.coord(2, iz) : 0.0));

  ScalarField prev(b), curr(b), next(b);
  // Embed f (node-aligned by construction of the box).
  {
    int ox = static_cast<int>(std::lround((f.grid.origin[0] - b.origin[0]) / h));
    int oy = static_cast<int>(std::lround((f.grid.origin[1] - b.origin[1]) / h));
    int oz = n == 3 ? static_cast<int>(std::lround((f.grid.origin[2] - b.origin[2]) / h))
                    : 0;
    for (int iz = 0; iz < f.grid.shape[2]; ++iz)
      for (int iy = 0; iy < f.grid.shape[1]; ++iy)
        for (int ix = 0; ix < f.grid.shape[0]; ++ix)
          curr.v[b.index(ix + ox, iy + oy, iz + oz)] = f.at(ix, iy, iz);
  }
  prev = curr;

  const double r2 = dt * dt / (h * h);
  const int outer_hi = (n == 2) ? ny - 1 : nz - 1;  // interior rows/planes

  auto step_into = [&](const ScalarField& um, const ScalarField& u0, ScalarField& up,
                       double scale) {
    // up = u0*2 - um + scale * dt^2 * c^2 * Lap(u0) on interior nodes
    // (Dirichlet walls stay 0). scale = 1/2 for the first step.
    parallel_for(1, outer_hi, opts.threads, [&](int outer) {
      if (n == 2) {
        const int iy = outer;
        const std::size_t base = b.index(0, iy, 0);
        const double* u = u0.v.data();
        double* w = up.v.data();
        for (int ix = 1; ix < nx - 1; ++ix) {
          const std::size_t q = base + ix;
          const double lap = u[q - 1] + u[q + 1] + u[q - nx] + u[q + nx] - 4.0 * u[q];
          w[q] = 2.0 * u[q] - um.v[q] + scale * r2 * c2[q] * lap;
        }
      } else {
        const int iz = outer;
        const std::size_t plane = static_cast<std::size_t>(nx) * ny;
        for (int iy = 1; iy < ny - 1; ++iy) {
          const std::size_t base = b.index(0, iy, iz);
          const double* u = u0.v.data();
          double* w = up.v.data();
          for (int ix = 1; ix < nx - 1; ++ix) {
            const std::size_t q = base + ix;
            const double lap = u[q - 1] + u[q + 1] + u[q - nx] + u[q + nx] +
                               u[q - plane] + u[q + plane] - 6.0 * u[q];
            w[q] = 2.0 * u[q] - um.v[q] + scale * r2 * c2[q] * lap;
          }
        }
      }
    });
  };

  on_step(0, 0.0, prev, curr, dt);
  for (int k = 1; k < plan.nt; ++k) {
    // First step uses u_t(0) = 0: u^1 = u^0 + (dt^2/2) c^2 Lap u^0, which the
    // generic update produces with um = u0 and half the Laplacian weight.
    if (k == 1)
      step_into(curr, curr, next, 0.5);
    else
      step_into(prev, curr, next, 1.0);
    std::swap(prev.v, curr.v);
    std::swap(curr.v, next.v);
    on_step(k, k * dt, prev, curr, dt);
  }
}

SensorData fdtd_forward(const ScalarField& f, const SoundSpeedField& c,
                        const AcquisitionGeometry& geom, double T,
                        const FdtdOptions& opts) {
  geom.validate();
  require(geom.n == f.grid.n, "fdtd: dimension mismatch");
  SensorData out;
  fdtd_simulate(f, c, geom, T, opts,
                [&](int k, double, const ScalarField&, const ScalarField& u, double dt) {
                  if (out.nt == 0) {
                    const int nt = static_cast<int>(std::ceil(T / dt - 1e-9)) + 1;
                    out = SensorData(geom, nt, dt);
                  }
                  if (k >= out.nt) return;
                  for (std::size_t i = 0; i < geom.size(); ++i) {
                    const auto& y = geom.pos[i];
                    out.at(i, k) = u.interp(y[0], y[1], y[2]);
                  }
                });
  return out;
}

// --- means <-> pressure -------------------------------------------------------

void derivative_4th(const double* u, int n, double h, double* out) {
  require(n >= 6, "derivative: need at least 6 samples");
  const double s = 1.0 / (12.0 * h);
  out[0] = (-25 * u[0] + 48 * u[1] - 36 * u[2] + 16 * u[3] - 3 * u[4]) * s;
  out[1] = (-3 * u[0] - 10 * u[1] + 18 * u[2] - 6 * u[3] + u[4]) * s;
  for (int k = 2; k < n - 2; ++k)
    out[k] = (u[k - 2] - 8 * u[k - 1] + 8 * u[k + 1] - u[k + 2]) * s;
  out[n - 2] = (3 * u[n - 1] + 10 * u[n - 2] - 18 * u[n - 3] + 6 * u[n - 4] - u[n - 5]) * s;
  out[n - 1] =
      (25 * u[n - 1] - 48 * u[n - 2] + 36 * u[n - 3] - 16 * u[n - 4] + 3 * u[n - 5]) * s;
}

void abel_half_integral(const double* u, int n, double dr, double* out) {
  // Exact on piecewise-linear u: per cell, u = A + B r integrates against
  // 1/sqrt(t^2 - r^2) to A*asin(r/t) - B*sqrt(t^2 - r^2); the endpoint cell
  // is handled by the same antiderivatives (asin -> pi/2, sqrt -> 0).
  out[0] = 0;
  for (int k = 1; k < n; ++k) {
    const double t = k * dr;
    double acc = 0;
    for (int j = 0; j < k; ++j) {
      const double r0 = j * dr, r1 = (j + 1) * dr;
      const double B = (u[j + 1] - u[j]) / dr;
      const double A = u[j] - B * r0;
      const double as1 = (j + 1 == k) ? 0.5 * pi : std::asin(r1 / t);
      const double as0 = std::asin(r0 / t);
      const double sq1 = (j + 1 == k) ? 0.0 : std::sqrt(t * t - r1 * r1);
      const double sq0 = std::sqrt(t * t - r0 * r0);
      acc += A * (as1 - as0) - B * (sq1 - sq0);
    }
    out[k] = acc;
  }
}

SensorData means_to_pressure(const SphericalSinogram& s, double speed) {
  require(speed > 0, "means_to_pressure: speed must be positive");
  require(s.conv == RadialConvention::mean,
          "means_to_pressure: sinogram must use the mean convention");
  s.validate();
  const SphericalSinogram& m = s;
  const int nr = m.nr;
  SensorData out(m.geom, nr, m.dr / speed);
  std::vector<double> w(nr), d(nr);
  for (std::size_t i = 0; i < m.geom.size(); ++i) {
    const double* row = m.row(i);
    if (m.geom.n == 3) {
      for (int j = 0; j < nr; ++j) w[j] = (j * m.dr) * row[j];
      derivative_4th(w.data(), nr, m.dr, d.data());
    } else {
      for (int j = 0; j < nr; ++j) w[j] = (j * m.dr) * row[j];
      std::vector<double> F(nr);
      abel_half_integral(w.data(), nr, m.dr, F.data());
      derivative_4th(F.data(), nr, m.dr, d.data());
    }
    // p(y, t) is the s-derivative evaluated at s = speed*t, so the trace on
    // the matched time grid is the derivative array itself.
    for (int k = 0; k < nr; ++k) out.at(i, k) = d[k];
  }
  return out;
}

SphericalSinogram pressure_to_means(const SensorData& d, double speed) {
  require(speed > 0, "pressure_to_means: speed must be positive");
  d.validate();
  const int nt = d.nt;
  const double ds = speed * d.dt;  // radial grid matched to the time grid
  SphericalSinogram out(d.geom, nt, ds, RadialConvention::mean);
  std::vector<double> A(nt), w(nt), B(nt), phi(nt);
  for (std::size_t i = 0; i < d.geom.size(); ++i) {
    const double* p = d.row(i);
    A[0] = 0;  // running integral of p along the radial coordinate
    for (int k = 1; k < nt; ++k) A[k] = A[k - 1] + 0.5 * ds * (p[k - 1] + p[k]);
    double* row = out.row(i);
    if (d.geom.n == 3) {
      row[0] = p[0];
      for (int k = 1; k < nt; ++k) row[k] = A[k] / (k * ds);
    } else {
      for (int k = 0; k < nt; ++k) w[k] = A[k] * (k * ds);
      abel_half_integral(w.data(), nt, ds, B.data());
      derivative_4th(B.data(), nt, ds, phi.data());
      for (int k = 1; k < nt; ++k) row[k] = (2.0 / pi) * phi[k] / (k * ds);
      row[0] = 3 * row[1] - 3 * row[2] + row[3];
    }
  }
  return out;
}

}  // namespace tatk
