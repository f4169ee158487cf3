#include "tatk/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "tatk/special.hpp"
#include "tatk/time_reversal.hpp"

namespace tatk {
namespace {

// --- C1 evaluation of c^2 and its gradient ------------------------------------
//
// Rays need a differentiable speed: the Hamiltonian drift diagnostic only
// measures integrator error when the gradient is the exact derivative of the
// interpolant, so c^2 is interpolated with a (clamped) Catmull-Rom tensor
// patch and differentiated analytically.

void cr_basis(double u, double* w, double* d) {
  const double u2 = u * u, u3 = u2 * u;
  w[0] = 0.5 * (-u3 + 2 * u2 - u);
  w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
  w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
  w[3] = 0.5 * (u3 - u2);
  d[0] = 0.5 * (-3 * u2 + 4 * u - 1);
  d[1] = 0.5 * (9 * u2 - 10 * u);
  d[2] = 0.5 * (-9 * u2 + 8 * u + 1);
  d[3] = 0.5 * (3 * u2 - 2 * u);
}

struct SpeedEval {
  bool constant = true;
  double c2bg = 1;
  GridSpec g;
  std::vector<double> c2;

  void init(const SoundSpeedField& c) {
    c2bg = c.background * c.background;
    constant = c.is_constant();
    if (constant) return;
    g = c.field.grid;
    c2.resize(g.size());
    for (std::size_t i = 0; i < c2.size(); ++i) c2[i] = c.field.v[i] * c.field.v[i];
  }

  double eval(const std::array<double, 3>& x, std::array<double, 3>& grad) const {
    grad = {0, 0, 0};
    if (constant) return c2bg;
    const int n = g.n;
    double f[3] = {0, 0, 0};
    for (int a = 0; a < n; ++a) {
      f[a] = (x[a] - g.origin[a]) / g.spacing[a];
      if (f[a] < 0 || f[a] > g.shape[a] - 1) return c2bg;
    }
    int i0[3] = {0, 0, 0};
    double w[3][4], d[3][4];
    for (int a = 0; a < n; ++a) {
      i0[a] = std::min(static_cast<int>(f[a]), g.shape[a] - 2);
      cr_basis(f[a] - i0[a], w[a], d[a]);
    }
    auto tap = [&](int a, int k) {
      return std::clamp(i0[a] - 1 + k, 0, g.shape[a] - 1);
    };
    double val = 0, gx = 0, gy = 0, gz = 0;
    if (n == 2) {
      for (int ky = 0; ky < 4; ++ky) {
        const int jy = tap(1, ky);
        for (int kx = 0; kx < 4; ++kx) {
          const double s = c2[g.index(tap(0, kx), jy)];
          val += w[0][kx] * w[1][ky] * s;
          gx += d[0][kx] * w[1][ky] * s;
          gy += w[0][kx] * d[1][ky] * s;
        }
      }
    } else {
      for (int kz = 0; kz < 4; ++kz) {
        const int jz = tap(2, kz);
        for (int ky = 0; ky < 4; ++ky) {
          const int jy = tap(1, ky);
          for (int kx = 0; kx < 4; ++kx) {
            const double s = c2[g.index(tap(0, kx), jy, jz)];
            val += w[0][kx] * w[1][ky] * w[2][kz] * s;
            gx += d[0][kx] * w[1][ky] * w[2][kz] * s;
            gy += w[0][kx] * d[1][ky] * w[2][kz] * s;
            gz += w[0][kx] * w[1][ky] * d[2][kz] * s;
          }
        }
      }
    }
    grad[0] = gx / g.spacing[0];
    grad[1] = gy / g.spacing[1];
    if (n == 3) grad[2] = gz / g.spacing[2];
    return val;
  }
};

struct RayPoint {
  std::array<double, 3> x, xi;
};

// x' = c^2 xi, xi' = -grad(c^2) |xi|^2 / 2
RayPoint deriv(const SpeedEval& c2, const RayPoint& s) {
  std::array<double, 3> grad;
  const double v2 = c2.eval(s.x, grad);
  const double xi2 = sq(s.xi[0]) + sq(s.xi[1]) + sq(s.xi[2]);
  RayPoint d;
  for (int a = 0; a < 3; ++a) {
    d.x[a] = v2 * s.xi[a];
    d.xi[a] = -0.5 * grad[a] * xi2;
  }
  return d;
}

RayPoint rk4_step(const SpeedEval& c2, const RayPoint& s, double dt) {
  auto adv = [&](const RayPoint& p, const RayPoint& k, double f) {
    RayPoint q;
    for (int a = 0; a < 3; ++a) {
      q.x[a] = p.x[a] + f * k.x[a];
      q.xi[a] = p.xi[a] + f * k.xi[a];
    }
    return q;
  };
  const RayPoint k1 = deriv(c2, s);
  const RayPoint k2 = deriv(c2, adv(s, k1, dt / 2));
  const RayPoint k3 = deriv(c2, adv(s, k2, dt / 2));
  const RayPoint k4 = deriv(c2, adv(s, k3, dt));
  RayPoint out;
  for (int a = 0; a < 3; ++a) {
    out.x[a] = s.x[a] + dt / 6 * (k1.x[a] + 2 * k2.x[a] + 2 * k3.x[a] + k4.x[a]);
    out.xi[a] = s.xi[a] + dt / 6 * (k1.xi[a] + 2 * k2.xi[a] + 2 * k3.xi[a] + k4.xi[a]);
  }
  return out;
}

double hamiltonian(const SpeedEval& c2, const RayPoint& s) {
  std::array<double, 3> grad;
  const double v2 = c2.eval(s.x, grad);
  return 0.5 * v2 * (sq(s.xi[0]) + sq(s.xi[1]) + sq(s.xi[2]));
}

double default_ray_dt(const SoundSpeedField& c, double t_max) {
  if (c.is_constant())
    return std::max(t_max / 1000.0, 1e-12);
  const double h = c.field.grid.min_spacing();
  return std::min(t_max / 1000.0, 0.5 * h / c.max_speed());
}

struct TraceResult {
  RayPoint end;
  bool escaped = false;
  double escape_time = -1;
  double drift = 0;
};

TraceResult trace_one(const SpeedEval& c2, RayPoint s, double t_max, double dt,
                      const std::array<double, 3>& center, double radius,
                      std::vector<std::array<double, 3>>* path) {
  TraceResult out;
  const double H0 = hamiltonian(c2, s);
  double dist_prev = std::sqrt(sq(s.x[0] - center[0]) + sq(s.x[1] - center[1]) +
                               sq(s.x[2] - center[2]));
  if (path) path->push_back(s.x);
  const int nsteps = static_cast<int>(std::ceil(t_max / dt - 1e-12));
  for (int k = 0; k < nsteps; ++k) {
    const double step = std::min(dt, t_max - k * dt);
    const RayPoint nxt = rk4_step(c2, s, step);
    const double dist = std::sqrt(sq(nxt.x[0] - center[0]) + sq(nxt.x[1] - center[1]) +
                                  sq(nxt.x[2] - center[2]));
    out.drift = std::max(out.drift,
                         std::abs(hamiltonian(c2, nxt) - H0) / std::max(H0, 1e-300));
    s = nxt;
    if (path) path->push_back(s.x);
    if (dist >= radius) {
      const double f =
          dist > dist_prev ? (radius - dist_prev) / (dist - dist_prev) : 1.0;
      out.escape_time = k * dt + std::clamp(f, 0.0, 1.0) * step;
      out.escaped = true;
      break;
    }
    dist_prev = dist;
  }
  out.end = s;
  return out;
}

// --- geometric helpers -------------------------------------------------------------

bool angle_on_arc(const AcquisitionGeometry& geom, double theta) {
  if (geom.kind == GeometryKind::circle) return true;
  const double span = geom.theta1 - geom.theta0;
  double t = theta - geom.theta0;
  t -= std::floor(t / (2 * pi)) * 2 * pi;  // into [0, 2pi)
  return t <= span + 1e-12;
}

// does the point where a path leaves the bounding sphere lie on the
// instrumented part of the surface?
bool crossing_detected(const AcquisitionGeometry& geom, const std::array<double, 3>& p) {
  switch (geom.kind) {
    case GeometryKind::circle:
    case GeometryKind::sphere:
    case GeometryKind::cube_faces:
      return true;  // closed
    case GeometryKind::arc:
      return angle_on_arc(geom,
                          std::atan2(p[1] - geom.center[1], p[0] - geom.center[0]));
    default:
      return false;
  }
}

std::array<double, 3> fib_dir(int i, int count) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double z = 1.0 - (2.0 * i + 1.0) / count;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * pi * std::fmod(i / golden, 1.0);
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

}  // namespace

RayBundle trace_rays(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                     const std::vector<RaySeed>& seeds, double t_max, double dt,
                     bool keep_paths, int threads) {
  c.validate();
  geom.validate();
  require(t_max > 0, "trace_rays: t_max must be positive");
  const double R = geom.bounding_radius();
  if (dt <= 0) dt = default_ray_dt(c, t_max);
  require(dt > 0 && dt <= t_max, "trace_rays: bad dt");

  SpeedEval c2;
  c2.init(c);
  RayBundle out;
  out.dt = dt;
  out.t_max = t_max;
  out.rays.resize(seeds.size());
  parallel_for(0, static_cast<int>(seeds.size()), threads, [&](int i) {
    Ray& ray = out.rays[i];
    ray.seed = seeds[i];
    RayPoint s;
    s.x = seeds[i].x;
    const double m = std::sqrt(sq(seeds[i].xi[0]) + sq(seeds[i].xi[1]) +
                               sq(seeds[i].xi[2]));
    require(m > 0, "trace_rays: zero direction");
    std::array<double, 3> grad;
    const double cv = std::sqrt(c2.eval(s.x, grad));
    for (int a = 0; a < 3; ++a) s.xi[a] = seeds[i].xi[a] / (m * cv);
    const TraceResult r = trace_one(c2, s, t_max, dt, geom.center, R,
                                    keep_paths ? &ray.path : nullptr);
    ray.escaped = r.escaped;
    ray.escape_time = r.escape_time;
    ray.hamiltonian_drift = r.drift;
    ray.valid = r.drift <= 1e-4;
  });
  return out;
}

VisibilityMap visibility_map(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                             const GridSpec& grid, int directions_per_node,
                             int threads) {
  c.validate();
  geom.validate();
  grid.validate();
  require(directions_per_node >= 2, "visibility_map: need at least 2 directions");
  require(geom.kind != GeometryKind::custom,
          "visibility_map: custom geometries are not supported");
  VisibilityMap out;
  out.grid = grid;
  out.directions = directions_per_node;
  out.fraction.assign(grid.size(), 0.0);

  const int n = grid.n, D = directions_per_node;
  const double R = geom.bounding_radius();
  const auto& C = geom.center;
  SpeedEval c2;
  c2.init(c);
  const bool straight = c.is_constant();
  const double t_cap = straight ? 0 : 3.0 * (2.0 * R / c.min_speed());
  const double dt = straight ? 0 : default_ray_dt(c, t_cap);

  const int nz = grid.shape[2], ny = grid.shape[1], nx = grid.shape[0];
  parallel_for(0, ny * nz, threads, [&](int row) {
    const int iy = row % ny, iz = row / ny;
    for (int ix = 0; ix < nx; ++ix) {
      const std::array<double, 3> x{grid.coord(0, ix), grid.coord(1, iy),
                                    grid.coord(2, iz)};
      const double d2c = sq(x[0] - C[0]) + sq(x[1] - C[1]) + sq(x[2] - C[2]);
      int vis = 0;
      for (int d = 0; d < D; ++d) {
        std::array<double, 3> u{0, 0, 0};
        if (n == 2) {
          const double th = pi * (d + 0.5) / D;  // unsigned directions
          u = {std::cos(th), std::sin(th), 0};
        } else {
          u = fib_dir(d, D);
        }
        bool hit = false;
        if (straight) {
          // both intersections of the line with the bounding circle/sphere
          const double b = (x[0] - C[0]) * u[0] + (x[1] - C[1]) * u[1] +
                           (x[2] - C[2]) * u[2];
          const double disc = b * b - (d2c - R * R);
          if (disc >= 0) {
            const double s = std::sqrt(disc);
            for (double t : {-b + s, -b - s}) {
              const std::array<double, 3> p{x[0] + t * u[0], x[1] + t * u[1],
                                            x[2] + t * u[2]};
              if (crossing_detected(geom, p)) {
                hit = true;
                break;
              }
            }
          }
        } else {
          for (int sgn : {1, -1}) {
            RayPoint s0;
            s0.x = x;
            std::array<double, 3> grad;
            const double cv = std::sqrt(c2.eval(x, grad));
            for (int a = 0; a < 3; ++a) s0.xi[a] = sgn * u[a] / cv;
            const TraceResult r = trace_one(c2, s0, t_cap, dt, C, R, nullptr);
            if (r.escaped && crossing_detected(geom, r.end.x)) {
              hit = true;
              break;
            }
          }
        }
        if (hit) ++vis;
      }
      out.fraction[grid.index(ix, iy, iz)] = static_cast<double>(vis) / D;
    }
  });
  return out;
}

EscapeReport escape_time(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                         const EscapeOptions& opts) {
  c.validate();
  geom.validate();
  require(opts.radial_samples >= 1 && opts.directions >= 2,
          "escape_time: bad sample counts");
  const double R = geom.bounding_radius();
  const auto& C = geom.center;
  EscapeReport rep;
  rep.cap = opts.cap_factor * (2.0 * R / c.min_speed());

  static const double canonical[6] = {0.0, 0.25, 0.5, 0.75, 0.9, 0.9999};
  std::vector<double> fracs;
  if (opts.radial_samples <= 6)
    fracs.assign(canonical, canonical + opts.radial_samples);
  else
    for (int i = 0; i < opts.radial_samples; ++i)
      fracs.push_back(0.9999 * i / (opts.radial_samples - 1));

  std::vector<std::array<double, 3>> dirs;
  for (int j = 0; j < opts.directions; ++j) {
    if (geom.n == 2)
      dirs.push_back({std::cos(2 * pi * j / opts.directions),
                      std::sin(2 * pi * j / opts.directions), 0});
    else
      dirs.push_back(fib_dir(j, opts.directions));
  }

  std::vector<RaySeed> seeds;
  for (double f : fracs)
    for (const auto& pd : dirs) {
      // one position per (fraction, position direction), rays in all directions
      const std::array<double, 3> x{C[0] + f * R * pd[0], C[1] + f * R * pd[1],
                                    C[2] + f * R * pd[2]};
      for (const auto& rd : dirs) seeds.push_back({x, rd});
      if (f == 0.0) break;  // the center position does not depend on pd
    }

  const RayBundle b = trace_rays(c, geom, seeds, rep.cap, 0, false, opts.threads);
  rep.total = static_cast<int>(b.rays.size());
  for (const auto& r : b.rays) {
    if (r.escaped) {
      ++rep.escaped;
      rep.max_escape_time = std::max(rep.max_escape_time, r.escape_time);
    }
  }
  rep.trapping_suspected = rep.escaped < rep.total;
  return rep;
}

RangeReport check_moment_condition(const SphericalSinogram& sino, int k_max,
                                   int threads) {
  (void)threads;
  sino.validate();
  require(k_max >= 0, "check_moment_condition: k_max must be >= 0");
  const SphericalSinogram s = sino.to_convention(RadialConvention::integral);
  const auto& geom = s.geom;
  const int ndet = static_cast<int>(geom.size()), n = geom.n, nr = s.nr;
  const double omega = unit_sphere_area(n);
  const double R = std::max(geom.bounding_radius(), 1e-300);

  RangeReport rep;
  for (int k = 0; k <= k_max; ++k) {
    // moment values per detector
    std::vector<double> m(ndet, 0.0);
    for (int i = 0; i < ndet; ++i) {
      const double* row = s.row(i);
      double acc = 0;
      for (int j = 0; j < nr; ++j) {
        const double w = (j == 0 || j == nr - 1) ? 0.5 : 1.0;
        acc += w * std::pow(j * s.dr, 2 * k) * row[j];
      }
      m[i] = acc * s.dr / omega;
    }

    // polynomial basis of total degree <= 2k in the (scaled) detector coords
    std::vector<std::vector<double>> cols;
    const int deg = 2 * k;
    for (int a = 0; a <= deg; ++a)
      for (int b = 0; a + b <= deg; ++b)
        for (int cc = 0; a + b + cc <= deg; ++cc) {
          if (n == 2 && cc > 0) continue;
          std::vector<double> col(ndet);
          for (int i = 0; i < ndet; ++i) {
            const auto& y = geom.pos[i];
            col[i] = std::pow((y[0] - geom.center[0]) / R, a) *
                     std::pow((y[1] - geom.center[1]) / R, b) *
                     (n == 3 ? std::pow((y[2] - geom.center[2]) / R, cc) : 1.0);
          }
          cols.push_back(std::move(col));
        }
    require(ndet >= static_cast<int>(cols.size()),
            "check_moment_condition: too few detectors for the requested order");

    // modified Gram-Schmidt with rank-revealing drop (detector sets on a
    // circle/sphere make the monomials dependent)
    std::vector<std::vector<double>> q;
    for (auto& col : cols) {
      const double n0 = l2_norm(col);
      for (const auto& qq : q) {
        double dot = 0;
        for (int i = 0; i < ndet; ++i) dot += qq[i] * col[i];
        for (int i = 0; i < ndet; ++i) col[i] -= dot * qq[i];
      }
      const double n1 = l2_norm(col);
      if (n1 > 1e-10 * std::max(n0, 1e-300)) {
        for (int i = 0; i < ndet; ++i) col[i] /= n1;
        q.push_back(std::move(col));
      }
    }

    std::vector<double> fit(ndet, 0.0);
    for (const auto& qq : q) {
      double dot = 0;
      for (int i = 0; i < ndet; ++i) dot += qq[i] * m[i];
      for (int i = 0; i < ndet; ++i) fit[i] += dot * qq[i];
    }
    double num = 0, den = 0;
    for (int i = 0; i < ndet; ++i) {
      num += sq(m[i] - fit[i]);
      den += sq(m[i]);
    }
    rep.moment_residual.push_back(den > 0 ? std::sqrt(num / den) : 0.0);
  }
  return rep;
}

RangeReport check_orthogonality(const SphericalSinogram& sino, const EigenSystem& eig,
                                int threads) {
  sino.validate();
  eig.validate();
  const auto& geom = sino.geom;
  require(geom.n == 2 && eig.region.n == 2,
          "check_orthogonality: implemented for 2-D data and disk modes");
  require(eig.kind == EigenModeKind::disk_analytic,
          "check_orthogonality: needs analytic disk modes");
  const SphericalSinogram s = sino.to_convention(RadialConvention::mean);
  const int ndet = static_cast<int>(geom.size()), nr = s.nr;

  // data norm over S x [0, rmax]
  double gnorm2 = 0;
  for (int i = 0; i < ndet; ++i) {
    const double* row = s.row(i);
    double acc = 0;
    for (int j = 0; j < nr; ++j) {
      const double w = (j == 0 || j == nr - 1) ? 0.5 : 1.0;
      acc += w * sq(row[j]);
    }
    gnorm2 += geom.weight[i] * acc * s.dr;
  }
  const double gnorm = std::sqrt(gnorm2);

  RangeReport rep;
  rep.orthogonality_residual.resize(eig.size());
  parallel_for(0, static_cast<int>(eig.size()), threads, [&](int m) {
    const double lam = eig.lambda[m];
    std::vector<double> trace(ndet);
    double tnorm2 = 0;
    for (int i = 0; i < ndet; ++i) {
      trace[i] = eig.normal_derivative(m, geom.pos[i]);
      tnorm2 += geom.weight[i] * sq(trace[i]);
    }
    double pair = 0;
    for (int i = 0; i < ndet; ++i) {
      const double* row = s.row(i);
      double acc = 0;
      for (int j = 0; j < nr; ++j) {
        const double t = j * s.dr;
        const double w = (j == 0 || j == nr - 1) ? 0.5 : 1.0;
        acc += w * sph_bessel_weight(2, lam * t) * t * row[j];
      }
      pair += geom.weight[i] * trace[i] * acc * s.dr;
    }
    const double den = gnorm * std::sqrt(tnorm2);
    rep.orthogonality_residual[m] = den > 0 ? std::abs(pair) / den : 0.0;
  });
  return rep;
}

RangeReport check_range_wave_odd(const SensorData& data, double speed, int grid_nodes,
                                 int threads) {
  data.validate();
  require(speed > 0, "check_range_wave_odd: speed must be positive");
  require(data.geom.n == 3 && data.geom.kind == GeometryKind::sphere,
          "check_range_wave_odd: needs 3-D data on a sphere");
  const double R = data.geom.radius;
  const double scale = speed / R;  // t -> tau = t c / R
  require(data.t_max() * scale >= 2.0 - 1e-9,
          "check_range_wave_odd: data window shorter than one diameter");

  // rescale onto the unit sphere and the window [0, 2]
  GeometryParams gp;
  gp.kind = GeometryKind::sphere;
  gp.n = 3;
  gp.count = static_cast<int>(data.geom.size());
  gp.radius = 1.0;
  const AcquisitionGeometry unit = make_geometry(gp);
  const int nt2 = std::clamp(static_cast<int>(std::ceil(2.0 / (data.dt * scale))) + 1,
                             65, 4097);
  SensorData d(unit, nt2, 2.0 / (nt2 - 1));
  for (std::size_t i = 0; i < unit.size(); ++i)
    for (int k = 0; k < nt2; ++k)
      d.at(static_cast<int>(i), k) = data.sample(static_cast<int>(i), k * d.dt / scale);

  TimeReversalOptions tro;
  tro.want_qt0 = true;
  tro.threads = threads;
  const GridSpec grid = GridSpec::box(3, grid_nodes, -1.0, 1.0);
  const TimeReversalResult tr =
      time_reverse_full(d, SoundSpeedField::constant(1.0), grid, tro);

  const double h = grid.spacing[0];
  const double qt_norm = tr.qt0.l2() * std::sqrt(h * h * h);
  double gnorm2 = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    double acc = 0;
    for (int k = 0; k < nt2; ++k) {
      const double w = (k == 0 || k == nt2 - 1) ? 0.5 : 1.0;
      acc += w * sq(d.at(static_cast<int>(i), k));
    }
    gnorm2 += unit.weight[i] * acc * d.dt;
  }
  RangeReport rep;
  const double T = 2.0;
  rep.wave_residual =
      gnorm2 > 0 ? qt_norm * T / std::sqrt(gnorm2) : qt_norm;
  return rep;
}

DecayCurve energy_decay_curve(const ScalarField& f, const SoundSpeedField& c,
                              const AcquisitionGeometry& geom, double T, int samples,
                              const FdtdOptions& opts) {
  require(samples >= 2, "energy_decay_curve: need at least 2 samples");
  geom.validate();
  const double R = geom.bounding_radius();
  const auto& C = geom.center;

  std::vector<double> ts, es;
  std::vector<char> mask;  // interior-of-S nodes of the solver grid
  GridSpec sg;
  fdtd_simulate(f, c, geom, T, opts,
                [&](int step, double t, const ScalarField& prev, const ScalarField& curr,
                    double dt) {
                  if (step == 0) {
                    sg = curr.grid;
                    mask.assign(sg.size(), 0);
                    for (int iz = 0; iz < sg.shape[2]; ++iz)
                      for (int iy = 0; iy < sg.shape[1]; ++iy)
                        for (int ix = 0; ix < sg.shape[0]; ++ix) {
                          const double d2 = sq(sg.coord(0, ix) - C[0]) +
                                            sq(sg.coord(1, iy) - C[1]) +
                                            sq(sg.coord(2, iz) - C[2]);
                          if (d2 < sq(R)) mask[sg.index(ix, iy, iz)] = 1;
                        }
                    return;
                  }
                  const int n = sg.n;
                  double cell = 1;
                  for (int a = 0; a < n; ++a) cell *= sg.spacing[a];
                  double kin = 0, pot = 0;
                  const long sx = 1, sy = sg.shape[0],
                             sz = static_cast<long>(sg.shape[0]) * sg.shape[1];
                  for (int iz = 0; iz < sg.shape[2]; ++iz)
                    for (int iy = 0; iy < sg.shape[1]; ++iy)
                      for (int ix = 0; ix < sg.shape[0]; ++ix) {
                        const std::size_t id = sg.index(ix, iy, iz);
                        if (!mask[id]) continue;
                        const double cv =
                            c.value(sg.coord(0, ix), sg.coord(1, iy), sg.coord(2, iz));
                        kin += sq((curr.v[id] - prev.v[id]) / dt) / (cv * cv);
                        // average of the two levels, one-sided at the box edge
                        auto avg = [&](std::size_t a, std::size_t b) {
                          return 0.5 * (curr.v[a] + prev.v[a]) -
                                 0.5 * (curr.v[b] + prev.v[b]);
                        };
                        double g2 = 0;
                        if (ix + 1 < sg.shape[0])
                          g2 += sq(avg(id + sx, id) / sg.spacing[0]);
                        if (iy + 1 < sg.shape[1])
                          g2 += sq(avg(id + sy, id) / sg.spacing[1]);
                        if (n == 3 && iz + 1 < sg.shape[2])
                          g2 += sq(avg(id + sz, id) / sg.spacing[2]);
                        pot += g2;
                      }
                  ts.push_back(t - 0.5 * dt);
                  es.push_back(0.5 * cell * (kin + pot));
                });

  DecayCurve out;
  const int m = static_cast<int>(ts.size());
  const int stride = std::max(1, m / samples);
  for (int i = 0; i < m; i += stride) {
    out.t.push_back(ts[i]);
    out.energy.push_back(es[i]);
  }
  if (!ts.empty() && (out.t.empty() || out.t.back() != ts.back())) {
    out.t.push_back(ts.back());
    out.energy.push_back(es.back());
  }
  return out;
}

}  // namespace tatk
