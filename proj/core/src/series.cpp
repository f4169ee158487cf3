#include "tatk/series.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numeric>

#include <lapacke.h>

#include "tatk/fftu.hpp"
#include "tatk/io_json.hpp"
#include "tatk/io_tatf.hpp"
#include "tatk/special.hpp"

namespace tatk {

namespace {

using cd = std::complex<double>;

// --- region helpers ----------------------------------------------------------

double region_tol(const GridSpec& g) { return 1e-9 * (1.0 + g.max_extent()); }

std::array<double, 3> grid_hi(const GridSpec& g) {
  return {g.origin[0] + g.spacing[0] * (g.shape[0] - 1),
          g.origin[1] + g.spacing[1] * (g.shape[1] - 1),
          g.n == 3 ? g.origin[2] + g.spacing[2] * (g.shape[2] - 1) : 0.0};
}

// free-space radial kernel, the real standing-wave Green's function
double green_radial(int n, double lam, double r) {
  if (n == 2) return -0.25 * std::cyl_neumann(0.0, lam * r);
  return std::cos(lam * r) / (4.0 * pi * r);
}

struct CubeCandidate {
  double lam_plain;
  std::array<int, 3> m;
};

// one-sided second-order inward derivative from a zero boundary value
double inward_deriv(double u1, double u2, double h) { return (4 * u1 - u2) / (2 * h); }

}  // namespace

// --- EigenRegion --------------------------------------------------------------

EigenRegion EigenRegion::cube(int n, double lo, double hi, int nodes_per_axis) {
  EigenRegion r;
  r.kind = EigenRegionKind::cube;
  r.n = n;
  r.lo = {lo, lo, n == 3 ? lo : 0.0};
  r.hi = {hi, hi, n == 3 ? hi : 0.0};
  r.grid = GridSpec::box(n, nodes_per_axis, lo, hi);
  r.validate();
  return r;
}

EigenRegion EigenRegion::disk(double radius, int nodes_per_axis) {
  EigenRegion r;
  r.kind = EigenRegionKind::ball;
  r.n = 2;
  r.radius = radius;
  r.center = {0, 0, 0};
  r.grid = GridSpec::box(2, nodes_per_axis, -radius, radius);
  r.validate();
  return r;
}

EigenRegion EigenRegion::from_grid(const GridSpec& g) {
  EigenRegion r;
  r.kind = EigenRegionKind::grid;
  r.n = g.n;
  r.grid = g;
  r.lo = g.origin;
  r.hi = grid_hi(g);
  r.validate();
  return r;
}

void EigenRegion::validate() const {
  require(n == 2 || n == 3, "EigenRegion: dimension must be 2 or 3");
  grid.validate();
  require(grid.n == n, "EigenRegion: grid dimension mismatch");
  const double tol = region_tol(grid);
  const auto ghi = grid_hi(grid);
  switch (kind) {
    case EigenRegionKind::cube:
      for (int a = 0; a < n; ++a) {
        require(hi[a] > lo[a], "EigenRegion: empty cube");
        require(std::abs(grid.origin[a] - lo[a]) <= tol &&
                    std::abs(ghi[a] - hi[a]) <= tol,
                "EigenRegion: grid must cover the cube exactly");
      }
      break;
    case EigenRegionKind::ball:
      require(n == 2, "EigenRegion: analytic ball modes implemented in 2-D only");
      require(radius > 0, "EigenRegion: ball radius must be positive");
      for (int a = 0; a < n; ++a) {
        require(grid.origin[a] <= center[a] - radius + tol &&
                    ghi[a] >= center[a] + radius - tol,
                "EigenRegion: grid must cover the ball");
      }
      break;
    case EigenRegionKind::grid:
      for (int a = 0; a < n; ++a) {
        require(std::abs(grid.origin[a] - lo[a]) <= tol &&
                    std::abs(ghi[a] - hi[a]) <= tol,
                "EigenRegion: box must equal the grid box");
      }
      break;
  }
}

// --- eigensystem construction --------------------------------------------------

namespace {

EigenSystem build_cube_analytic(const EigenRegion& region, double c0, bool weighted,
                                int count) {
  EigenSystem e;
  e.region = region;
  e.kind = EigenModeKind::cube_analytic;
  e.weighted = weighted;
  e.speed = SoundSpeedField::constant(c0);
  const GridSpec& g = region.grid;
  const int n = region.n;
  std::array<double, 3> L{0, 0, 0};
  std::array<int, 3> mmax{1, 1, 1};
  for (int a = 0; a < n; ++a) {
    L[a] = region.hi[a] - region.lo[a];
    mmax[a] = g.shape[a] - 2;
    require(mmax[a] >= 1, "eigensystem: grid too small");
  }
  std::vector<CubeCandidate> cand;
  cand.reserve(static_cast<std::size_t>(mmax[0]) * mmax[1] * (n == 3 ? mmax[2] : 1));
  const int m3hi = n == 3 ? mmax[2] : 1;
  for (int m3 = n == 3 ? 1 : 0; m3 <= (n == 3 ? m3hi : 0); ++m3)
    for (int m2 = 1; m2 <= mmax[1]; ++m2)
      for (int m1 = 1; m1 <= mmax[0]; ++m1) {
        double s = sq(m1 / L[0]) + sq(m2 / L[1]);
        if (n == 3) s += sq(m3 / L[2]);
        cand.push_back({pi * std::sqrt(s), {m1, m2, m3}});
      }
  std::sort(cand.begin(), cand.end(), [](const CubeCandidate& a, const CubeCandidate& b) {
    if (a.lam_plain != b.lam_plain) return a.lam_plain < b.lam_plain;
    return a.m < b.m;
  });
  require(count >= 1, "eigensystem: count must be >= 1");
  require(static_cast<std::size_t>(count) <= cand.size(),
          "eigensystem: mode count exceeds the grid resolution");
  const double nyq = pi / g.min_spacing();
  require(cand[count - 1].lam_plain <= nyq,
          "eigensystem: requested modes exceed the grid Nyquist limit");
  e.lambda.resize(count);
  e.cube_index.resize(count);
  for (int m = 0; m < count; ++m) {
    e.lambda[m] = c0 * cand[m].lam_plain;
    e.cube_index[m] = cand[m].m;
  }
  return e;
}

EigenSystem build_disk_analytic(const EigenRegion& region, double c0, bool weighted,
                                int count) {
  EigenSystem e;
  e.region = region;
  e.kind = EigenModeKind::disk_analytic;
  e.weighted = weighted;
  e.speed = SoundSpeedField::constant(c0);
  const double R = region.radius;
  // enumerate zeros j_{k,s} below a growing bound until enough modes exist
  double bound = (2.0 * std::sqrt(static_cast<double>(count)) + 8.0);
  std::vector<EigenSystem::DiskMode> cand;
  for (;;) {
    cand.clear();
    for (int k = 0;; ++k) {
      const double first = bessel_j_zero(k, 1);
      if (first > bound) break;
      for (int s = 1;; ++s) {
        const double z = s == 1 ? first : bessel_j_zero(k, s);
        if (z > bound) break;
        cand.push_back({k, s, 0, z / R});
        if (k > 0) cand.push_back({k, s, 1, z / R});
      }
    }
    if (cand.size() >= static_cast<std::size_t>(count)) break;
    bound *= 1.5;
    require(bound < 1e6, "eigensystem: cannot enumerate enough disk modes");
  }
  std::sort(cand.begin(), cand.end(),
            [](const EigenSystem::DiskMode& a, const EigenSystem::DiskMode& b) {
              if (a.lam != b.lam) return a.lam < b.lam;
              if (a.k != b.k) return a.k < b.k;
              return a.parity < b.parity;
            });
  const double nyq = pi / region.grid.min_spacing();
  require(count >= 1, "eigensystem: count must be >= 1");
  require(cand[count - 1].lam <= nyq,
          "eigensystem: requested modes exceed the grid Nyquist limit");
  e.lambda.resize(count);
  e.disk_modes.assign(cand.begin(), cand.begin() + count);
  for (int m = 0; m < count; ++m) e.lambda[m] = c0 * e.disk_modes[m].lam;
  return e;
}

EigenSystem build_grid_numeric(const EigenRegion& region, const SoundSpeedField* c,
                               int count, int threads) {
  EigenSystem e;
  e.region = region;
  e.kind = EigenModeKind::grid_numeric;
  e.weighted = c != nullptr;
  e.speed = c ? *c : SoundSpeedField::constant(1.0);
  const GridSpec& g = region.grid;
  const int n = g.n;
  const int nx = g.shape[0], ny = g.shape[1], nz = g.shape[2];
  const int ix1 = nx - 2, iy1 = ny - 2, iz1 = n == 3 ? nz - 2 : 1;
  require(ix1 >= 1 && iy1 >= 1 && (n == 2 || iz1 >= 1), "eigensystem: grid too small");
  const std::size_t nint = static_cast<std::size_t>(ix1) * iy1 * (n == 3 ? iz1 : 1);
  require(nint <= 6000,
          "eigensystem: numeric region too large for the dense eigensolver");
  require(count >= 1 && static_cast<std::size_t>(count) <= nint,
          "eigensystem: mode count exceeds the grid resolution");

  std::vector<double> cval(g.size(), 1.0);
  if (c)
    for (int iz = 0; iz < nz; ++iz)
      for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
          cval[g.index(ix, iy, iz)] =
              c->value(g.coord(0, ix), g.coord(1, iy), n == 3 ? g.coord(2, iz) : 0.0);

  auto intidx = [&](int ix, int iy, int iz) {
    return static_cast<std::size_t>(ix - 1) +
           static_cast<std::size_t>(ix1) *
               (static_cast<std::size_t>(iy - 1) +
                static_cast<std::size_t>(iy1) * static_cast<std::size_t>(n == 3 ? iz - 1 : 0));
  };

  // symmetric form: A v = -c (discrete Laplacian) (c v), eigenpairs via a
  // dense symmetric solver, ascending
  const lapack_int N = static_cast<lapack_int>(nint);
  std::vector<double> A(nint * nint, 0.0);
  const double inv2[3] = {1.0 / sq(g.spacing[0]), 1.0 / sq(g.spacing[1]),
                          n == 3 ? 1.0 / sq(g.spacing[2]) : 0.0};
  const int zlo = n == 3 ? 1 : 0, zhi = n == 3 ? nz - 1 : 1;
  for (int iz = zlo; iz < zhi; ++iz)
    for (int iy = 1; iy < ny - 1; ++iy)
      for (int ix = 1; ix < nx - 1; ++ix) {
        const std::size_t p = intidx(ix, iy, iz);
        const double cp = cval[g.index(ix, iy, iz)];
        double diag = 0;
        for (int a = 0; a < n; ++a) diag += 2.0 * inv2[a];
        A[p + nint * p] = cp * cp * diag;
        const int di[3] = {1, 0, 0}, dj[3] = {0, 1, 0}, dk[3] = {0, 0, 1};
        for (int a = 0; a < n; ++a) {
          for (int s = -1; s <= 1; s += 2) {
            const int jx = ix + s * di[a], jy = iy + s * dj[a], jz = iz + s * dk[a];
            const bool interior = jx >= 1 && jx <= nx - 2 && jy >= 1 && jy <= ny - 2 &&
                                  (n == 2 || (jz >= 1 && jz <= nz - 2));
            if (!interior) continue;
            const double cq = cval[g.index(jx, jy, jz)];
            A[p + nint * intidx(jx, jy, jz)] = -cp * cq * inv2[a];
          }
        }
      }

  std::vector<double> w(nint);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', N, A.data(), N, w.data());
  require(info == 0, "eigensystem: dense symmetric eigensolver failed");

  const double cmin = e.speed.min_speed();
  const double nyq = cmin * pi / g.min_spacing();
  double lam_last = std::sqrt(std::max(w[count - 1], 0.0));
  require(lam_last <= nyq,
          "eigensystem: requested modes exceed the grid Nyquist limit");

  double vol = 1;
  for (int a = 0; a < n; ++a) vol *= g.spacing[a];
  const double scale = 1.0 / std::sqrt(vol);

  e.lambda.resize(count);
  e.modes.assign(count, std::vector<double>(g.size(), 0.0));
  parallel_for(0, count, threads, [&](int m) {
    e.lambda[m] = std::sqrt(std::max(w[m], 0.0));
    const double* v = &A[static_cast<std::size_t>(m) * nint];
    // deterministic sign: largest-magnitude entry positive
    std::size_t imax = 0;
    for (std::size_t p = 1; p < nint; ++p)
      if (std::abs(v[p]) > std::abs(v[imax])) imax = p;
    const double flip = v[imax] < 0 ? -1.0 : 1.0;
    auto& u = e.modes[m];
    for (int iz = zlo; iz < zhi; ++iz)
      for (int iy = 1; iy < ny - 1; ++iy)
        for (int ix = 1; ix < nx - 1; ++ix) {
          const std::size_t node = g.index(ix, iy, iz);
          u[node] = flip * scale * cval[node] * v[intidx(ix, iy, iz)];
        }
  });
  return e;
}

}  // namespace

EigenSystem eigensystem_dirichlet(const EigenRegion& region, const SoundSpeedField* c,
                                  int count, int threads) {
  region.validate();
  if (c) c->validate();
  const bool var_c = c && !c->is_constant();
  if (var_c) {
    require(region.kind == EigenRegionKind::grid || region.kind == EigenRegionKind::cube,
            "eigensystem: variable speed needs a grid-discretized region");
    return build_grid_numeric(region, c, count, threads);
  }
  const double c0 = c ? c->background : 1.0;
  switch (region.kind) {
    case EigenRegionKind::cube:
      return build_cube_analytic(region, c0, c != nullptr, count);
    case EigenRegionKind::ball:
      return build_disk_analytic(region, c0, c != nullptr, count);
    case EigenRegionKind::grid:
      return build_grid_numeric(region, c, count, threads);
  }
  require(false, "eigensystem: unknown region kind");
  return {};
}

// --- EigenSystem methods --------------------------------------------------------

void EigenSystem::validate() const {
  region.validate();
  const std::size_t M = lambda.size();
  require(M > 0, "EigenSystem: empty");
  for (std::size_t m = 1; m < M; ++m)
    require(lambda[m] >= lambda[m - 1] - 1e-12, "EigenSystem: eigenvalues not sorted");
  switch (kind) {
    case EigenModeKind::cube_analytic:
      require(cube_index.size() == M, "EigenSystem: malformed cube modes");
      break;
    case EigenModeKind::disk_analytic:
      require(disk_modes.size() == M, "EigenSystem: malformed disk modes");
      break;
    case EigenModeKind::grid_numeric:
      require(modes.size() == M, "EigenSystem: malformed numeric modes");
      for (const auto& u : modes)
        require(u.size() == region.grid.size(), "EigenSystem: mode size mismatch");
      break;
  }
  if (weighted) speed.validate();
}

namespace {

double cube_mode_value(const EigenRegion& region, const std::array<int, 3>& mi,
                       double amp, double x, double y, double z) {
  double v = amp;
  const double coords[3] = {x, y, z};
  for (int a = 0; a < region.n; ++a) {
    const double L = region.hi[a] - region.lo[a];
    v *= std::sqrt(2.0 / L) * std::sin(pi * mi[a] * (coords[a] - region.lo[a]) / L);
  }
  return v;
}

double disk_mode_norm(const EigenSystem::DiskMode& dm, double R) {
  const double ctheta = dm.k == 0 ? 2.0 * pi : pi;
  const double jnext = std::cyl_bessel_j(dm.k + 1, dm.lam * R);
  return 1.0 / std::sqrt(ctheta * 0.5 * R * R * jnext * jnext);
}

}  // namespace

ScalarField EigenSystem::mode_field(std::size_t m) const {
  require(m < size(), "EigenSystem: mode index out of range");
  const GridSpec& g = region.grid;
  ScalarField f(g);
  const double amp = weighted ? speed.background : 1.0;
  switch (kind) {
    case EigenModeKind::cube_analytic: {
      for (int iz = 0; iz < g.shape[2]; ++iz)
        for (int iy = 0; iy < g.shape[1]; ++iy)
          for (int ix = 0; ix < g.shape[0]; ++ix)
            f.at(ix, iy, iz) =
                cube_mode_value(region, cube_index[m], amp, g.coord(0, ix),
                                g.coord(1, iy), g.n == 3 ? g.coord(2, iz) : 0.0);
      break;
    }
    case EigenModeKind::disk_analytic: {
      const auto& dm = disk_modes[m];
      const double N = disk_mode_norm(dm, region.radius) * amp;
      for (int iy = 0; iy < g.shape[1]; ++iy)
        for (int ix = 0; ix < g.shape[0]; ++ix) {
          const double x = g.coord(0, ix) - region.center[0];
          const double y = g.coord(1, iy) - region.center[1];
          const double rho = std::sqrt(x * x + y * y);
          if (rho > region.radius) continue;
          const double th = std::atan2(y, x);
          const double ang = dm.parity == 0 ? std::cos(dm.k * th) : std::sin(dm.k * th);
          f.at(ix, iy) = N * std::cyl_bessel_j(dm.k, dm.lam * rho) * ang;
        }
      break;
    }
    case EigenModeKind::grid_numeric:
      f.v = modes[m];
      break;
  }
  return f;
}

double EigenSystem::normal_derivative(std::size_t m, const std::array<double, 3>& y) const {
  require(m < size(), "EigenSystem: mode index out of range");
  const GridSpec& g = region.grid;
  const double amp = weighted ? speed.background : 1.0;

  if (kind == EigenModeKind::disk_analytic) {
    const auto& dm = disk_modes[m];
    const double dx = y[0] - region.center[0], dy = y[1] - region.center[1];
    const double rho = std::sqrt(dx * dx + dy * dy);
    require(std::abs(rho - region.radius) <= 1e-6 * region.radius,
            "EigenSystem: point is not on the circle");
    const double th = std::atan2(dy, dx);
    const double ang = dm.parity == 0 ? std::cos(dm.k * th) : std::sin(dm.k * th);
    // J_k'(j_{k,s}) = -J_{k+1}(j_{k,s}) at a zero of J_k
    return -amp * disk_mode_norm(dm, region.radius) * dm.lam *
           std::cyl_bessel_j(dm.k + 1, dm.lam * region.radius) * ang;
  }

  // cube / grid boxes: locate the face
  const double tol = 1e-6 * (1.0 + g.max_extent());
  const auto ghi = grid_hi(g);
  int axis = -1, side = 0;
  for (int a = 0; a < g.n && axis < 0; ++a) {
    if (std::abs(y[a] - g.origin[a]) <= tol) {
      axis = a;
      side = 0;
    } else if (std::abs(y[a] - ghi[a]) <= tol) {
      axis = a;
      side = 1;
    }
  }
  require(axis >= 0, "EigenSystem: point is not on the region boundary");

  if (kind == EigenModeKind::cube_analytic) {
    const auto& mi = cube_index[m];
    const double L = region.hi[axis] - region.lo[axis];
    double v = amp * std::sqrt(2.0 / L) * (pi * mi[axis] / L) *
               (side == 1 ? ((mi[axis] % 2 == 0) ? 1.0 : -1.0) : 1.0);
    // outward direction: -e_axis on the low face
    if (side == 0) v = -v;
    const double coords[3] = {y[0], y[1], y[2]};
    for (int a = 0; a < g.n; ++a) {
      if (a == axis) continue;
      const double La = region.hi[a] - region.lo[a];
      v *= std::sqrt(2.0 / La) * std::sin(pi * mi[a] * (coords[a] - region.lo[a]) / La);
    }
    return v;
  }

  // numeric: one-sided differences at boundary nodes, interpolated tangentially
  const auto& u = modes[m];
  const double h = g.spacing[axis];
  const int nb = g.shape[axis];
  auto node_deriv = [&](int it0, int it1) {
    int idx[3] = {it0, it1, 0};
    // idx currently holds tangential indices in axis order; expand below
    int c[3] = {0, 0, 0};
    int t = 0;
    for (int a = 0; a < 3; ++a) {
      if (a == axis)
        c[a] = side == 1 ? nb - 1 : 0;
      else
        c[a] = idx[t++];
    }
    const int step = side == 1 ? -1 : 1;
    int c1[3] = {c[0], c[1], c[2]}, c2[3] = {c[0], c[1], c[2]};
    c1[axis] += step;
    c2[axis] += 2 * step;
    const double u1 = u[g.index(c1[0], c1[1], c1[2])];
    const double u2 = u[g.index(c2[0], c2[1], c2[2])];
    return -inward_deriv(u1, u2, h);  // outward = -inward
  };
  // tangential axes and local coordinates
  int taxes[2] = {-1, -1};
  int nt = 0;
  for (int a = 0; a < g.n; ++a)
    if (a != axis) taxes[nt++] = a;
  int i0[2] = {0, 0};
  double w1[2] = {0, 0};
  for (int t = 0; t < nt; ++t) {
    const int a = taxes[t];
    double f = (y[a] - g.origin[a]) / g.spacing[a];
    f = std::min(std::max(f, 0.0), static_cast<double>(g.shape[a] - 1));
    i0[t] = std::min(static_cast<int>(f), g.shape[a] - 2);
    w1[t] = f - i0[t];
  }
  if (nt == 1)
    return (1 - w1[0]) * node_deriv(i0[0], 0) + w1[0] * node_deriv(i0[0] + 1, 0);
  double v = 0;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) {
      const double wgt = (a ? w1[0] : 1 - w1[0]) * (b ? w1[1] : 1 - w1[1]);
      if (wgt != 0) v += wgt * node_deriv(i0[0] + a, i0[1] + b);
    }
  return v;
}

// --- eigensystem cache ----------------------------------------------------------

void write_eigensystem_tatf(const std::string& path, const EigenSystem& e) {
  e.validate();
  using nlohmann::json;
  json extra;
  extra["region"] = {
      {"kind", e.region.kind == EigenRegionKind::cube   ? "cube"
               : e.region.kind == EigenRegionKind::ball ? "ball"
                                                        : "grid"},
      {"n", e.region.n},
      {"lo", e.region.lo},
      {"hi", e.region.hi},
      {"radius", e.region.radius},
      {"center", e.region.center}};
  extra["grid"] = {{"n", e.region.grid.n},
                   {"shape", e.region.grid.shape},
                   {"origin", e.region.grid.origin},
                   {"spacing", e.region.grid.spacing}};
  extra["mode_kind"] = e.kind == EigenModeKind::cube_analytic   ? "cube_analytic"
                       : e.kind == EigenModeKind::disk_analytic ? "disk_analytic"
                                                                : "grid_numeric";
  extra["weighted"] = e.weighted;
  extra["lambda"] = e.lambda;
  if (e.kind == EigenModeKind::cube_analytic) extra["cube_index"] = e.cube_index;
  if (e.kind == EigenModeKind::disk_analytic) {
    json dm = json::array();
    for (const auto& d : e.disk_modes)
      dm.push_back({{"k", d.k}, {"s", d.s}, {"parity", d.parity}, {"lam", d.lam}});
    extra["disk_modes"] = dm;
  }
  json speed = {{"background", e.speed.background},
                {"support_radius", e.speed.support_radius},
                {"support_center", e.speed.support_center},
                {"has_field", !e.speed.is_constant()}};
  extra["speed"] = speed;

  std::vector<double> payload;
  if (!e.speed.is_constant())
    payload.insert(payload.end(), e.speed.field.v.begin(), e.speed.field.v.end());
  if (e.kind == EigenModeKind::grid_numeric)
    for (const auto& u : e.modes) payload.insert(payload.end(), u.begin(), u.end());

  json h;
  h["kind"] = "eigsys";
  h["shape"] = {payload.size()};
  h["extra"] = extra;
  tatf_detail::write_tatf(path, h, payload.data(), payload.size());
}

EigenSystem read_eigensystem_tatf(const std::string& path) {
  using nlohmann::json;
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "eigsys: cannot open " + path);
  const json h = tatf_detail::read_header(in, path);
  require(h.value("kind", "") == "eigsys", "eigsys: wrong TATF1 kind in " + path);
  const json& extra = h.at("extra");
  EigenSystem e;
  const json& jr = extra.at("region");
  const std::string rk = jr.at("kind").get<std::string>();
  e.region.kind = rk == "cube"   ? EigenRegionKind::cube
                  : rk == "ball" ? EigenRegionKind::ball
                                 : EigenRegionKind::grid;
  e.region.n = jr.at("n").get<int>();
  e.region.lo = jr.at("lo").get<std::array<double, 3>>();
  e.region.hi = jr.at("hi").get<std::array<double, 3>>();
  e.region.radius = jr.at("radius").get<double>();
  e.region.center = jr.at("center").get<std::array<double, 3>>();
  const json& jg = extra.at("grid");
  e.region.grid.n = jg.at("n").get<int>();
  e.region.grid.shape = jg.at("shape").get<std::array<int, 3>>();
  e.region.grid.origin = jg.at("origin").get<std::array<double, 3>>();
  e.region.grid.spacing = jg.at("spacing").get<std::array<double, 3>>();
  const std::string mk = extra.at("mode_kind").get<std::string>();
  e.kind = mk == "cube_analytic"   ? EigenModeKind::cube_analytic
           : mk == "disk_analytic" ? EigenModeKind::disk_analytic
                                   : EigenModeKind::grid_numeric;
  e.weighted = extra.at("weighted").get<bool>();
  e.lambda = extra.at("lambda").get<std::vector<double>>();
  if (e.kind == EigenModeKind::cube_analytic)
    e.cube_index = extra.at("cube_index").get<std::vector<std::array<int, 3>>>();
  if (e.kind == EigenModeKind::disk_analytic) {
    for (const auto& d : extra.at("disk_modes")) {
      EigenSystem::DiskMode dm;
      dm.k = d.at("k").get<int>();
      dm.s = d.at("s").get<int>();
      dm.parity = d.at("parity").get<int>();
      dm.lam = d.at("lam").get<double>();
      e.disk_modes.push_back(dm);
    }
  }
  const json& js = extra.at("speed");
  e.speed.background = js.at("background").get<double>();
  e.speed.support_radius = js.at("support_radius").get<double>();
  e.speed.support_center = js.at("support_center").get<std::array<double, 3>>();
  const bool has_field = js.at("has_field").get<bool>();

  std::size_t count = 0;
  const std::size_t gsize = e.region.grid.size();
  if (has_field) count += gsize;
  if (e.kind == EigenModeKind::grid_numeric) count += e.lambda.size() * gsize;
  std::vector<double> payload = tatf_detail::read_payload(in, path, count);
  std::size_t off = 0;
  if (has_field) {
    e.speed.field.grid = e.region.grid;
    e.speed.field.v.assign(payload.begin(), payload.begin() + gsize);
    off = gsize;
  }
  if (e.kind == EigenModeKind::grid_numeric) {
    e.modes.resize(e.lambda.size());
    for (auto& u : e.modes) {
      u.assign(payload.begin() + off, payload.begin() + off + gsize);
      off += gsize;
    }
  }
  e.validate();
  return e;
}

// --- circular-harmonic inversion -------------------------------------------------

ScalarField invert_norton_2d(const SphericalSinogram& sino, const GridSpec& grid,
                             const NortonOptions& opts) {
  sino.validate();
  require(sino.geom.n == 2 && grid.n == 2, "norton: 2-D only");
  require(sino.geom.kind == GeometryKind::circle,
          "norton: uniform full-circle sampling required");
  require(sino.nr >= 8, "norton: need at least 8 radii");
  const SphericalSinogram gi = sino.conv == RadialConvention::integral
                                   ? sino
                                   : sino.to_convention(RadialConvention::integral);
  const int N = static_cast<int>(gi.geom.size());
  const int nr = gi.nr;
  const double dr = gi.dr, R = gi.geom.radius, rmax = gi.r_max();
  const auto C = gi.geom.center;

  int K = opts.max_harmonic >= 0 ? opts.max_harmonic : N / 2 - 1;
  K = std::min(K, (N - 1) / 2);
  require(K >= 0, "norton: need at least one harmonic");

  const double lam_max_limit = pi / dr;
  const double lam_step_limit = pi / (2.0 * (rmax + R));
  const double lam_max = opts.lambda_max > 0 ? opts.lambda_max : lam_max_limit;
  const double lam_step = opts.lambda_step > 0 ? opts.lambda_step : lam_step_limit;
  require(lam_max <= lam_max_limit * (1 + 1e-9),
          "norton: lambda_max beyond the radial Nyquist limit");
  require(lam_step <= lam_step_limit * (1 + 1e-9),
          "norton: lambda grid too coarse for the radial sampling");
  const int nl = static_cast<int>(std::floor(lam_max / lam_step));
  require(nl >= 8, "norton: lambda grid too short");

  // angular Fourier rows ghat_k(r), k = 0..K, with the absolute start angle
  const double th0 = std::atan2(gi.geom.pos[0][1] - C[1], gi.geom.pos[0][0] - C[0]);
  std::vector<cd> ghat(static_cast<std::size_t>(K + 1) * nr);
  {
    std::vector<cd> tmp(N), spec(N);
    for (int j = 0; j < nr; ++j) {
      for (int i = 0; i < N; ++i) tmp[i] = gi.at(i, j);
      fftu::dft(tmp.data(), spec.data(), N, false);
      for (int k = 0; k <= K; ++k)
        ghat[static_cast<std::size_t>(k) * nr + j] =
            spec[k] * std::polar(1.0 / N, -k * th0);
    }
  }

  // per-harmonic radial transforms F_k(lambda_l)
  std::vector<cd> F(static_cast<std::size_t>(nl) * (K + 1));
  parallel_for(0, nl, opts.threads, [&](int l) {
    const double lam = (l + 0.5) * lam_step;
    std::vector<double> j0(nr), y0(nr);
    for (int j = 1; j < nr; ++j) {
      j0[j] = std::cyl_bessel_j(0.0, lam * j * dr);
      y0[j] = std::cyl_neumann(0.0, lam * j * dr);
    }
    std::vector<double> jR(K + 1), yR(K + 1);
    bessel_j_array(K, lam * R, jR.data());
    bessel_y_array(K, lam * R, yR.data());
    for (int k = 0; k <= K; ++k) {
      const cd* row = &ghat[static_cast<std::size_t>(k) * nr];
      cd A(0, 0), B(0, 0);
      for (int j = 1; j < nr; ++j) {
        const double w = j == nr - 1 ? 0.5 * dr : dr;
        A += w * j0[j] * row[j];
        B += w * y0[j] * row[j];
      }
      const cd H(jR[k], yR[k]);
      F[static_cast<std::size_t>(l) * (K + 1) + k] = (A + cd(0, 1) * B) / H;
    }
  });

  // radial profiles f_k(rho) on a polar grid, via the order-k kernel; the
  // profiles carry content up to lam_max ~ pi/dr, so the table is refined
  // well past dr to keep the linear resampling error out of the pass band
  const double drho = 0.25 * dr;
  const int nrho = static_cast<int>(std::ceil(R / drho)) + 2;
  std::vector<cd> fk(static_cast<std::size_t>(K + 1) * nrho, cd(0, 0));
  parallel_for(0, nrho, opts.threads, [&](int p) {
    const double rho = p * drho;
    std::vector<double> jrho(K + 1);
    for (int l = 0; l < nl; ++l) {
      const double lam = (l + 0.5) * lam_step;
      bessel_j_array(K, lam * rho, jrho.data());
      const double wl = lam * lam_step;
      const cd* Fl = &F[static_cast<std::size_t>(l) * (K + 1)];
      for (int k = 0; k <= K; ++k)
        fk[static_cast<std::size_t>(k) * nrho + p] += Fl[k] * (jrho[k] * wl);
    }
  });

  if (opts.harmonic_energy) {
    auto& E = *opts.harmonic_energy;
    E.assign(K + 1, 0.0);
    for (int k = 0; k <= K; ++k) {
      double s = 0;
      for (int p = 0; p < nrho; ++p)
        s += std::norm(fk[static_cast<std::size_t>(k) * nrho + p]) * (p * drho) * drho;
      E[k] = (k == 0 ? 1.0 : 2.0) * s;
    }
  }

  // synthesis on the target grid (zero outside the acquisition circle)
  ScalarField out(grid);
  parallel_for(0, grid.shape[1], opts.threads, [&](int iy) {
    const double y = grid.coord(1, iy) - C[1];
    for (int ix = 0; ix < grid.shape[0]; ++ix) {
      const double x = grid.coord(0, ix) - C[0];
      const double rho = std::sqrt(x * x + y * y);
      if (rho >= R) continue;
      const double fp = std::min(rho / drho, static_cast<double>(nrho - 1));
      const int p0 = std::min(static_cast<int>(fp), nrho - 2);
      const double a = fp - p0;
      const double th = std::atan2(y, x);
      const cd ph = std::polar(1.0, th);
      cd pk(1, 0);
      double s = 0;
      for (int k = 0; k <= K; ++k) {
        const cd fkr = (1 - a) * fk[static_cast<std::size_t>(k) * nrho + p0] +
                       a * fk[static_cast<std::size_t>(k) * nrho + p0 + 1];
        s += (k == 0 ? 1.0 : 2.0) * (fkr * pk).real();
        pk *= ph;
      }
      out.at(ix, iy) = s / (2.0 * pi);
    }
  });
  return out;
}

// --- cube eigenfunction method ---------------------------------------------------

namespace {

void check_cube_geometry(const SphericalSinogram& sino, const EigenSystem& eig) {
  eig.validate();
  require(eig.kind == EigenModeKind::cube_analytic,
          "cube series: eigensystem must be the analytic cube kind");
  require(!eig.weighted, "cube series: plain-Laplacian eigensystem required");
  require(sino.geom.kind == GeometryKind::cube_faces,
          "cube series: cube-face acquisition geometry required");
  require(sino.geom.n == eig.region.n, "cube series: dimension mismatch");
  const double tol = 1e-9 * (1.0 + eig.region.grid.max_extent());
  for (int a = 0; a < eig.region.n; ++a) {
    require(std::abs(sino.geom.box_lo[a] - eig.region.lo[a]) <= tol &&
                std::abs(sino.geom.box_hi[a] - eig.region.hi[a]) <= tol,
            "cube series: geometry box differs from the eigensystem cube");
  }
}

// groups of consecutive equal eigenvalues (they share the radial integral)
std::vector<int> lambda_groups(const std::vector<double>& lam, std::vector<double>& rep) {
  std::vector<int> gid(lam.size());
  rep.clear();
  for (std::size_t m = 0; m < lam.size(); ++m) {
    if (rep.empty() || std::abs(lam[m] - rep.back()) > 1e-9 * (1.0 + lam[m])) rep.push_back(lam[m]);
    gid[m] = static_cast<int>(rep.size()) - 1;
  }
  return gid;
}

}  // namespace

std::vector<double> cube_series_coefficients(const SphericalSinogram& sino,
                                             const EigenSystem& eig,
                                             const SeriesOptions& opts) {
  sino.validate();
  check_cube_geometry(sino, eig);
  const SphericalSinogram gi = sino.conv == RadialConvention::integral
                                   ? sino
                                   : sino.to_convention(RadialConvention::integral);
  const int nr = gi.nr, ndet = static_cast<int>(gi.geom.size());
  const double dr = gi.dr;
  const int n = eig.region.n;
  const int M = static_cast<int>(eig.size());

  std::vector<double> rep;
  const std::vector<int> gid = lambda_groups(eig.lambda, rep);
  const int ngrp = static_cast<int>(rep.size());

  // radial kernel integrals I[det][group] = sum_j w_j Phi_lambda(r_j) g(det, r_j)
  std::vector<double> I(static_cast<std::size_t>(ndet) * ngrp, 0.0);
  parallel_for(0, ngrp, opts.threads, [&](int l) {
    std::vector<double> phi(nr, 0.0);
    for (int j = 1; j < nr; ++j) {
      const double w = j == nr - 1 ? 0.5 * dr : dr;
      phi[j] = w * green_radial(n, rep[l], j * dr);
    }
    for (int i = 0; i < ndet; ++i) {
      const double* g = gi.row(i);
      double s = 0;
      for (int j = 1; j < nr; ++j) s += phi[j] * g[j];
      I[static_cast<std::size_t>(i) * ngrp + l] = s;
    }
  });

  std::vector<double> alpha(M, 0.0);
  parallel_for(0, M, opts.threads, [&](int m) {
    double s = 0;
    for (int i = 0; i < ndet; ++i)
      s += gi.geom.weight[i] * I[static_cast<std::size_t>(i) * ngrp + gid[m]] *
           eig.normal_derivative(m, gi.geom.pos[i]);
    alpha[m] = s;
  });
  return alpha;
}

namespace {

// f = sum_m coef_m u_m on the region grid via a fast sine synthesis
ScalarField cube_sine_synthesis(const EigenSystem& eig, const std::vector<double>& coef,
                                double amp) {
  const GridSpec& g = eig.region.grid;
  const int n = g.n;
  std::array<int, 3> mi{g.shape[0] - 2, g.shape[1] - 2, n == 3 ? g.shape[2] - 2 : 1};
  std::vector<double> a(static_cast<std::size_t>(mi[0]) * mi[1] * (n == 3 ? mi[2] : 1),
                        0.0);
  double norm = amp;
  for (int ax = 0; ax < n; ++ax)
    norm *= std::sqrt(2.0 / (eig.region.hi[ax] - eig.region.lo[ax])) * 0.5;
  for (std::size_t m = 0; m < eig.size(); ++m) {
    const auto& mm = eig.cube_index[m];
    const std::size_t idx =
        static_cast<std::size_t>(mm[0] - 1) +
        static_cast<std::size_t>(mi[0]) *
            (static_cast<std::size_t>(mm[1] - 1) +
             static_cast<std::size_t>(mi[1]) * (n == 3 ? mm[2] - 1 : 0));
    a[idx] += coef[m] * norm;
  }
  fftu::dst1(a.data(), mi, n);
  ScalarField f(g);
  for (int iz = 0; iz < (n == 3 ? mi[2] : 1); ++iz)
    for (int iy = 0; iy < mi[1]; ++iy)
      for (int ix = 0; ix < mi[0]; ++ix)
        f.at(ix + 1, iy + 1, n == 3 ? iz + 1 : 0) =
            a[static_cast<std::size_t>(ix) +
              static_cast<std::size_t>(mi[0]) *
                  (static_cast<std::size_t>(iy) + static_cast<std::size_t>(mi[1]) * iz)];
  return f;
}

}  // namespace

ScalarField invert_cube_series(const SphericalSinogram& sino, const EigenSystem& eig,
                               const SeriesOptions& opts) {
  const std::vector<double> alpha = cube_series_coefficients(sino, eig, opts);
  return cube_sine_synthesis(eig, alpha, 1.0);
}

// --- variable-speed eigenfunction method -----------------------------------------

ScalarField invert_eigen_variable(const SensorData& data, const EigenSystem& eig,
                                  const EigenVarOptions& opts) {
  data.validate();
  eig.validate();
  require(eig.weighted, "eigen-variable: weighted (c^-2) eigensystem required");
  require(eig.kind != EigenModeKind::disk_analytic,
          "eigen-variable: disk eigensystems not supported");
  require(data.geom.n == eig.region.n, "eigen-variable: dimension mismatch");
  const int M = static_cast<int>(eig.size());
  const int ndet = static_cast<int>(data.geom.size());
  const int nt = data.nt;
  const double dt = data.dt;

  // warn when the boundary signal has not died down by T
  {
    const int k0 = std::max(0, nt - std::max(1, nt / 10));
    double tail = 0, all = 0;
    std::size_t ntail = 0;
    for (int i = 0; i < ndet; ++i) {
      const double* p = data.row(i);
      for (int k = 0; k < nt; ++k) {
        all += p[k] * p[k];
        if (k >= k0) {
          tail += p[k] * p[k];
          ++ntail;
        }
      }
    }
    all /= static_cast<double>(data.p.size());
    tail /= static_cast<double>(std::max<std::size_t>(ntail, 1));
    if (all > 0 && std::sqrt(tail / all) > opts.tail_energy_threshold) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "eigen-variable: time window may be too short; trailing-window "
                    "RMS is %.1f%% of the overall RMS",
                    100.0 * std::sqrt(tail / all));
      if (opts.warning)
        *opts.warning = buf;
      else
        std::fprintf(stderr, "%s\n", buf);
    } else if (opts.warning) {
      opts.warning->clear();
    }
  }

  // f_m = -(1/lambda_m) int_0^T sin(lambda_m t) g_m(t) dt,
  // g_m(t) = sum_i w_i p(y_i, t) (d u_m / d n)(y_i)
  std::vector<double> coef(M, 0.0);
  parallel_for(0, M, opts.threads, [&](int m) {
    const double lam = eig.lambda[m];
    if (lam <= 0) return;
    double acc = 0;
    std::vector<double> sinl(nt);
    for (int k = 0; k < nt; ++k) {
      const double w = (k == 0 || k == nt - 1) ? 0.5 * dt : dt;
      sinl[k] = w * std::sin(lam * k * dt);
    }
    for (int i = 0; i < ndet; ++i) {
      const double* p = data.row(i);
      double mom = 0;
      for (int k = 0; k < nt; ++k) mom += sinl[k] * p[k];
      acc += data.geom.weight[i] * eig.normal_derivative(m, data.geom.pos[i]) * mom;
    }
    coef[m] = -acc / lam;
  });

  if (eig.kind == EigenModeKind::cube_analytic)
    return cube_sine_synthesis(eig, coef, eig.speed.background);

  const GridSpec& g = eig.region.grid;
  ScalarField f(g);
  const std::size_t nv = g.size();
  parallel_for(0, static_cast<int>((nv + 4095) / 4096), opts.threads, [&](int chunk) {
    const std::size_t b = static_cast<std::size_t>(chunk) * 4096;
    const std::size_t e = std::min(nv, b + 4096);
    for (int m = 0; m < M; ++m) {
      const double cm = coef[m];
      if (cm == 0) continue;
      const double* u = eig.modes[m].data();
      for (std::size_t p = b; p < e; ++p) f.v[p] += cm * u[p];
    }
  });
  return f;
}

}  // namespace tatk
