#include "tatk/time_reversal.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tatk {
namespace {

// One clamped node: a solver index plus a fixed detector interpolation rule.
struct ClampNode {
  std::size_t node = 0;
  int count = 0;
  int det[8] = {0};
  double w[8] = {0};
};

struct Region {
  // inside test of the open region bounded by the acquisition surface
  bool ball = false;  // circle / sphere vs cube_faces box
  std::array<double, 3> center{0, 0, 0};
  double radius = 0;
  std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};

  bool inside(double x, double y, double z, double tol) const {
    if (ball)
      return sq(x - center[0]) + sq(y - center[1]) + sq(z - center[2]) <
             sq(radius * (1.0 - tol));
    for (int a = 0; a < 3; ++a) {
      const double c = a == 0 ? x : (a == 1 ? y : z);
      if (!(c > lo[a] + tol * (hi[a] - lo[a]) && c < hi[a] - tol * (hi[a] - lo[a])))
        return false;
    }
    return true;
  }

  // distance outside the region (0 inside), used to trim the clamp ring
  double excess(double x, double y, double z, int n) const {
    if (ball) {
      double d2 = sq(x - center[0]) + sq(y - center[1]);
      if (n == 3) d2 += sq(z - center[2]);
      return std::max(0.0, std::sqrt(d2) - radius);
    }
    double e = 0;
    for (int a = 0; a < n; ++a) {
      const double c = a == 0 ? x : (a == 1 ? y : z);
      e = std::max(e, std::max(lo[a] - c, c - hi[a]));
    }
    return std::max(0.0, e);
  }
};

Region region_of(const AcquisitionGeometry& geom) {
  Region r;
  switch (geom.kind) {
    case GeometryKind::circle:
    case GeometryKind::sphere:
      r.ball = true;
      r.center = geom.center;
      r.radius = geom.radius;
      require(r.radius > 0, "time reversal: geometry radius not set");
      break;
    case GeometryKind::cube_faces:
      r.lo = geom.box_lo;
      r.hi = geom.box_hi;
      if (geom.n == 2) {
        r.lo[2] = -1;
        r.hi[2] = 1;
      }
      break;
    default:
      require(false, "time reversal needs a closed acquisition surface "
                     "(circle, sphere, or cube faces)");
  }
  return r;
}

// Detector interpolation rule for a point projected onto the surface.
ClampNode make_clamp(const AcquisitionGeometry& geom, double x, double y, double z) {
  ClampNode c;
  const int N = static_cast<int>(geom.size());
  if (geom.kind == GeometryKind::circle) {
    // periodic cubic (Catmull-Rom) in the angle
    const double dth = 2.0 * pi / N;
    double s = (std::atan2(y - geom.center[1], x - geom.center[0]) - geom.theta0) / dth;
    s -= std::floor(s / N) * N;
    int i1 = static_cast<int>(std::floor(s));
    const double u = s - i1;
    i1 %= N;
    const double u2 = u * u, u3 = u2 * u;
    c.count = 4;
    c.det[0] = (i1 + N - 1) % N;
    c.det[1] = i1;
    c.det[2] = (i1 + 1) % N;
    c.det[3] = (i1 + 2) % N;
    c.w[0] = 0.5 * (-u3 + 2 * u2 - u);
    c.w[1] = 0.5 * (3 * u3 - 5 * u2 + 2);
    c.w[2] = 0.5 * (-3 * u3 + 4 * u2 + u);
    c.w[3] = 0.5 * (u3 - u2);
    return c;
  }
  if (geom.kind == GeometryKind::sphere) {
    // inverse angular distance over the nearest detectors
    const double rr = std::sqrt(sq(x - geom.center[0]) + sq(y - geom.center[1]) +
                                sq(z - geom.center[2]));
    const std::array<double, 3> u{(x - geom.center[0]) / rr, (y - geom.center[1]) / rr,
                                  (z - geom.center[2]) / rr};
    const int K = std::min(6, N);
    // angular distances via the dot product with stored unit normals
    std::vector<std::pair<double, int>> best;
    best.reserve(N);
    for (int i = 0; i < N; ++i) {
      const auto& nv = geom.normal[i];
      const double dot =
          std::clamp(u[0] * nv[0] + u[1] * nv[1] + u[2] * nv[2], -1.0, 1.0);
      best.emplace_back(std::acos(dot), i);
    }
    std::partial_sort(best.begin(), best.begin() + K, best.end());
    if (best[0].first < 1e-12) {
      c.count = 1;
      c.det[0] = best[0].second;
      c.w[0] = 1.0;
      return c;
    }
    double tot = 0;
    c.count = K;
    for (int k = 0; k < K; ++k) {
      c.det[k] = best[k].second;
      c.w[k] = 1.0 / (best[k].first + 1e-9);
      tot += c.w[k];
    }
    for (int k = 0; k < K; ++k) c.w[k] /= tot;
    return c;
  }

  // cube faces: pick the face by the largest violation, then interpolate on
  // the face's cell-centered detector grid (linear per axis, clamped ends).
  const int n = geom.n, m = geom.per_side;
  const double p[3] = {x, y, z};
  int axis = 0, side = 0;
  double worst = -1;
  for (int a = 0; a < n; ++a) {
    const double lo_e = geom.box_lo[a] - p[a], hi_e = p[a] - geom.box_hi[a];
    const double mid = 0.5 * (geom.box_lo[a] + geom.box_hi[a]);
    // distance past each wall; for points inside the slab use face proximity
    const double e = std::max(std::max(lo_e, hi_e),
                              -std::min(p[a] - geom.box_lo[a], geom.box_hi[a] - p[a]));
    if (e > worst) {
      worst = e;
      axis = a;
      side = p[a] > mid ? 1 : 0;
    }
  }
  auto line_coef = [&](int other, int& i0, double& a1) {
    const double len = geom.box_hi[other] - geom.box_lo[other];
    double s = (p[other] - geom.box_lo[other]) / (len / m) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(m - 1));
    i0 = std::min(static_cast<int>(s), m - 2);
    a1 = s - i0;
  };
  if (n == 2) {
    const int other = 1 - axis;
    int i0;
    double a1;
    line_coef(other, i0, a1);
    const int base = axis * 2 * m + side * m;
    c.count = 2;
    c.det[0] = base + i0;
    c.det[1] = base + i0 + 1;
    c.w[0] = 1.0 - a1;
    c.w[1] = a1;
    return c;
  }
  const int u_ax = (axis + 1) % 3, v_ax = (axis + 2) % 3;
  int iu, iv;
  double au, av;
  line_coef(u_ax, iu, au);
  line_coef(v_ax, iv, av);
  const int base = axis * 2 * m * m + side * m * m;
  c.count = 4;
  c.det[0] = base + iu * m + iv;
  c.det[1] = base + iu * m + iv + 1;
  c.det[2] = base + (iu + 1) * m + iv;
  c.det[3] = base + (iu + 1) * m + iv + 1;
  c.w[0] = (1 - au) * (1 - av);
  c.w[1] = (1 - au) * av;
  c.w[2] = au * (1 - av);
  c.w[3] = au * av;
  return c;
}

struct Solver {
  GridSpec sg;                        // solver grid (recon grid + region + pad)
  std::vector<double> c2;             // c^2 at solver nodes
  std::vector<std::size_t> interior;  // updated nodes
  std::vector<ClampNode> ring;        // clamped nodes
  double h = 0, cmax = 0;
  std::array<long, 3> off{0, 0, 0};   // recon node (i) = solver node (i + off)
};

Solver build_solver(const SensorData& data, const SoundSpeedField& c,
                    const GridSpec& grid, const Region& reg) {
  grid.validate();
  const int n = grid.n;
  require(n == data.geom.n, "time reversal: dimension mismatch");
  const double h = grid.spacing[0];
  for (int a = 0; a < n; ++a)
    require(std::abs(grid.spacing[a] - h) <= 1e-12 * h,
            "time reversal: grid spacing must be equal in all axes");

  Solver s;
  s.h = h;
  // lattice-aligned cover of the recon grid and the region plus a pad
  GridSpec sg;
  sg.n = n;
  for (int a = 0; a < 3; ++a) {
    if (a >= n) {
      sg.shape[a] = 1;
      sg.origin[a] = 0;
      sg.spacing[a] = 1;
      continue;
    }
    const double want_lo =
        std::min(grid.origin[a],
                 (reg.ball ? reg.center[a] - reg.radius : reg.lo[a]) - 3.0 * h);
    const double want_hi =
        std::max(grid.coord(a, grid.shape[a] - 1),
                 (reg.ball ? reg.center[a] + reg.radius : reg.hi[a]) + 3.0 * h);
    const long klo = static_cast<long>(std::ceil((grid.origin[a] - want_lo) / h - 1e-9));
    const long khi =
        static_cast<long>(std::ceil((want_hi - grid.origin[a]) / h - 1e-9));
    sg.origin[a] = grid.origin[a] - klo * h;
    sg.shape[a] = static_cast<int>(klo + khi + 1);
    sg.spacing[a] = h;
    s.off[a] = klo;
  }
  sg.validate();
  s.sg = sg;

  const std::size_t N = sg.size();
  s.c2.resize(N);
  s.cmax = 0;
  for (int iz = 0; iz < sg.shape[2]; ++iz)
    for (int iy = 0; iy < sg.shape[1]; ++iy)
      for (int ix = 0; ix < sg.shape[0]; ++ix) {
        const double cv = c.value(sg.coord(0, ix), sg.coord(1, iy), sg.coord(2, iz));
        s.c2[sg.index(ix, iy, iz)] = cv * cv;
        s.cmax = std::max(s.cmax, cv);
      }

  // classify: interior (updated), ring (clamped to data), rest frozen at 0
  for (int iz = 0; iz < sg.shape[2]; ++iz)
    for (int iy = 0; iy < sg.shape[1]; ++iy)
      for (int ix = 0; ix < sg.shape[0]; ++ix) {
        const double x = sg.coord(0, ix), y = sg.coord(1, iy), z = sg.coord(2, iz);
        const std::size_t id = sg.index(ix, iy, iz);
        if (reg.inside(x, y, z, 1e-12)) {
          s.interior.push_back(id);
        } else if (reg.excess(x, y, z, n) <= 2.5 * h) {
          ClampNode cn = make_clamp(data.geom, x, y, z);
          cn.node = id;
          s.ring.push_back(cn);
        }
      }
  require(!s.interior.empty(), "time reversal: no grid nodes inside the surface");
  return s;
}

void set_ring(const Solver& s, const SensorData& data, double t, std::vector<double>& u,
              std::vector<double>& detvals) {
  const int N = static_cast<int>(data.geom.size());
  for (int i = 0; i < N; ++i) detvals[i] = data.sample(i, t);
  for (const auto& cn : s.ring) {
    double v = 0;
    for (int k = 0; k < cn.count; ++k) v += cn.w[k] * detvals[cn.det[k]];
    u[cn.node] = v;
  }
}

// -c^2 * 5/7-point Laplacian step on the interior list
void step_interior(const Solver& s, const std::vector<double>& prev,
                   const std::vector<double>& curr, std::vector<double>& next,
                   double dt2, double first_step_scale, int threads) {
  const long sx = 1, sy = s.sg.shape[0],
             sz = static_cast<long>(s.sg.shape[0]) * s.sg.shape[1];
  const double ih2 = 1.0 / (s.h * s.h);
  const int n = s.sg.n;
  parallel_for(0, static_cast<int>(s.interior.size()), threads, [&](int k) {
    const std::size_t id = s.interior[k];
    double lap = curr[id - sx] + curr[id + sx] + curr[id - sy] + curr[id + sy] -
                 2.0 * n * curr[id];
    if (n == 3) lap += curr[id - sz] + curr[id + sz];
    lap *= ih2;
    next[id] = 2.0 * curr[id] - prev[id] + first_step_scale * dt2 * s.c2[id] * lap;
  });
}

// Harmonic extension of the ring values into the interior (plain CG on the
// 5/7-point Laplacian with Dirichlet data from `u`'s ring/frozen nodes).
void harmonic_fill(const Solver& s, std::vector<double>& u, int threads) {
  const long sx = 1, sy = s.sg.shape[0],
             sz = static_cast<long>(s.sg.shape[0]) * s.sg.shape[1];
  const int n = s.sg.n;
  const std::size_t m = s.interior.size();
  std::vector<std::size_t> slot(u.size(), static_cast<std::size_t>(-1));
  for (std::size_t k = 0; k < m; ++k) slot[s.interior[k]] = k;

  // A x = b with A = -Lap_h restricted to interior, b from clamped neighbors
  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    parallel_for(0, static_cast<int>(m), threads, [&](int k) {
      const std::size_t id = s.interior[k];
      double acc = 2.0 * n * x[k];
      const long nb[6] = {static_cast<long>(id) - sx, static_cast<long>(id) + sx,
                          static_cast<long>(id) - sy, static_cast<long>(id) + sy,
                          static_cast<long>(id) - sz, static_cast<long>(id) + sz};
      for (int q = 0; q < 2 * n; ++q) {
        const std::size_t j = slot[nb[q]];
        if (j != static_cast<std::size_t>(-1)) acc -= x[j];
      }
      out[k] = acc;
    });
  };
  std::vector<double> b(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t id = s.interior[k];
    const long nb[6] = {static_cast<long>(id) - sx, static_cast<long>(id) + sx,
                        static_cast<long>(id) - sy, static_cast<long>(id) + sy,
                        static_cast<long>(id) - sz, static_cast<long>(id) + sz};
    for (int q = 0; q < 2 * n; ++q)
      if (slot[nb[q]] == static_cast<std::size_t>(-1)) b[k] += u[nb[q]];
  }
  std::vector<double> x(m, 0), r = b, p = b, ap(m);
  double rs = 0;
  for (double v : r) rs += v * v;
  const double tol2 = rs * 1e-16;  // relative residual 1e-8
  for (int it = 0; it < 10000 && rs > tol2 && rs > 0; ++it) {
    apply(p, ap);
    double pap = 0;
    for (std::size_t k = 0; k < m; ++k) pap += p[k] * ap[k];
    if (pap <= 0) break;
    const double alpha = rs / pap;
    for (std::size_t k = 0; k < m; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * ap[k];
    }
    double rs2 = 0;
    for (double v : r) rs2 += v * v;
    const double beta = rs2 / rs;
    rs = rs2;
    for (std::size_t k = 0; k < m; ++k) p[k] = r[k] + beta * p[k];
  }
  for (std::size_t k = 0; k < m; ++k) u[s.interior[k]] = x[k];
}

ScalarField extract(const Solver& s, const GridSpec& grid, const Region& reg,
                    const std::vector<double>& u) {
  ScalarField out(grid);
  for (int iz = 0; iz < grid.shape[2]; ++iz)
    for (int iy = 0; iy < grid.shape[1]; ++iy)
      for (int ix = 0; ix < grid.shape[0]; ++ix) {
        if (!reg.inside(grid.coord(0, ix), grid.coord(1, iy), grid.coord(2, iz), 1e-12))
          continue;
        out.at(ix, iy, iz) =
            u[s.sg.index(ix + static_cast<int>(s.off[0]), iy + static_cast<int>(s.off[1]),
                         iz + static_cast<int>(s.off[2]))];
      }
  return out;
}

}  // namespace

TimeReversalResult time_reverse_full(const SensorData& data, const SoundSpeedField& c,
                                     const GridSpec& grid,
                                     const TimeReversalOptions& opts) {
  data.validate();
  c.validate();
  require(data.geom.closed(), "time reversal needs a closed acquisition surface");
  const Region reg = region_of(data.geom);
  Solver s = build_solver(data, c, grid, reg);

  const double T = data.t_max();
  require(T > 0, "time reversal: empty time window");
  const int n = grid.n;
  const double limit = s.h / (s.cmax * std::sqrt(static_cast<double>(n)));
  double dt = opts.dt;
  int nsteps;
  if (dt <= 0) {
    require(opts.cfl > 0 && opts.cfl <= 1, "time reversal: cfl must be in (0,1]");
    nsteps = std::max(2, static_cast<int>(std::ceil(T / (opts.cfl * limit))));
    dt = T / nsteps;
  } else {
    require(dt <= limit * (1 + 1e-12), "time reversal: dt violates the CFL limit");
    nsteps = static_cast<int>(std::lround(T / dt));
    require(nsteps >= 2 && std::abs(nsteps * dt - T) <= 1e-9 * T,
            "time reversal: dt must divide the data window");
  }
  const double dt2 = dt * dt;

  // reversed time: v(tau) = q(T - tau), v(0) = v_t(0) = 0 up to the cutoff rule
  const std::size_t N = s.sg.size();
  std::vector<double> prev(N, 0), curr(N, 0), next(N, 0), detvals(data.geom.size());

  set_ring(s, data, T, prev, detvals);
  if (opts.cutoff == CutoffMode::harmonic) harmonic_fill(s, prev, opts.threads);

  step_interior(s, prev, prev, curr, dt2, 0.5, opts.threads);  // v^1 from v_t(0)=0
  set_ring(s, data, T - dt, curr, detvals);

  std::vector<double> keep2, keep1;  // v^{K-2}, v^{K-1} for the derivative
  for (int k = 1; k < nsteps; ++k) {
    step_interior(s, prev, curr, next, dt2, 1.0, opts.threads);
    set_ring(s, data, T - (k + 1) * dt, next, detvals);
    std::swap(prev, curr);
    std::swap(curr, next);
    if (opts.want_qt0 && k == nsteps - 1) {
      keep2 = prev;  // v^{K-1}
      keep1 = curr;  // v^{K}
    }
  }

  TimeReversalResult out;
  out.q0 = extract(s, grid, reg, curr);
  if (opts.want_qt0) {
    // q_t(0) = -v_tau(T), one-sided 2nd order at the last step
    std::vector<double> qt(N, 0);
    // after the loop: curr = v^K, prev = v^{K-1}; need v^{K-2}
    // prev before the final swap was v^{K-2}; recover from kept copies
    const std::vector<double>& vk = keep1;
    const std::vector<double>& vk1 = keep2;
    for (std::size_t i = 0; i < N; ++i)
      qt[i] = -(3.0 * vk[i] - 4.0 * vk1[i] + next[i]) / (2.0 * dt);
    out.qt0 = extract(s, grid, reg, qt);
  } else {
    out.qt0 = ScalarField(GridSpec::box(grid.n, 2, -1, 1));
  }
  return out;
}

ScalarField time_reverse(const SensorData& data, const SoundSpeedField& c,
                         const GridSpec& grid, const TimeReversalOptions& opts) {
  TimeReversalOptions o = opts;
  o.want_qt0 = false;
  return time_reverse_full(data, c, grid, o).q0;
}

CutoffChoice choose_cutoff_time(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                                const CutoffTimeOptions& opts) {
  require(opts.safety >= 1, "choose_cutoff_time: safety factor must be >= 1");
  CutoffChoice out;
  out.rays = escape_time(c, geom, opts.escape);
  out.trapping_suspected = out.rays.trapping_suspected;
  const double base =
      out.rays.escaped > 0 ? out.rays.max_escape_time : out.rays.cap;
  out.T = opts.safety * base;
  return out;
}

}  // namespace tatk
