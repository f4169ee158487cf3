#include "tatk/fbp.hpp"

#include <cmath>
#include <vector>

#include "tatk/fftu.hpp"
#include "tatk/forward.hpp"

namespace tatk {
namespace {

constexpr double sqrt_2_over_pi = 0.7978845608028653558799;

int next_pow2(int v) {
  int p = 1;
  while (p < v) p <<= 1;
  return p;
}

// quadratic extrapolation to index 0 from indices 1..3
double extrap0(const double* a) { return 3 * a[1] - 3 * a[2] + a[3]; }

// clamped linear interpolation, x in index units
double tab_interp(const std::vector<double>& t, double x) {
  if (x <= 0) return t.front();
  if (x >= static_cast<double>(t.size() - 1)) return t.back();
  const int k = static_cast<int>(x);
  const double a = x - k;
  return (1 - a) * t[k] + a * t[k + 1];
}

GridSpec pad_grid(const GridSpec& g) {
  GridSpec p = g;
  for (int a = 0; a < g.n; ++a) {
    p.origin[a] -= g.spacing[a];
    p.shape[a] += 2;
  }
  return p;
}

std::vector<double> row_over_r(const double* g, int nr, double dr) {
  std::vector<double> a(nr);
  for (int j = 1; j < nr; ++j) a[j] = g[j] / (j * dr);
  a[0] = extrap0(a.data());
  return a;
}

// d/dr as a row operation
std::vector<double> drow(const std::vector<double>& a, double dr) {
  std::vector<double> d(a.size());
  derivative_4th(a.data(), static_cast<int>(a.size()), dr, d.data());
  return d;
}

struct Setup {
  SphericalSinogram gi;  // integral convention
  double R = 0;
  std::array<double, 3> C{0, 0, 0};
  int nr = 0;
  double dr = 0;
};

Setup prepare(const SphericalSinogram& s, const GridSpec& grid, GeometryKind want) {
  require(s.geom.kind == want,
          want == GeometryKind::circle ? "fbp: geometry must be a closed circle"
                                       : "fbp: geometry must be a closed sphere");
  require(grid.n == s.geom.n, "fbp: grid dimension mismatch");
  s.validate();
  require(s.nr >= 8, "fbp: need at least 8 radii");
  Setup u;
  u.gi = s.conv == RadialConvention::integral ? s
                                              : s.to_convention(RadialConvention::integral);
  u.R = s.geom.radius;
  u.C = s.geom.center;
  u.nr = s.nr;
  u.dr = s.dr;
  return u;
}

// f(x) = prefac * sum_i w_i * table_i(|x-y_i|) * weight(i, x, t); nodes outside
// the acquisition circle/sphere get 0 (mask), or everywhere when mask=false.
template <class WeightFn>
ScalarField backproject(const Setup& su, const GridSpec& grid,
                        const std::vector<std::vector<double>>& tab, double prefac,
                        int threads, bool mask, WeightFn weight) {
  ScalarField out(grid);
  const auto& geom = su.gi.geom;
  const int ndet = static_cast<int>(geom.size());
  const int nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2];
  const double tiny = 0.25 * su.dr;
  parallel_for(0, ny * nz, threads, [&](int row) {
    const int iy = row % ny, iz = row / ny;
    const double y = grid.coord(1, iy);
    const double z = grid.n == 3 ? grid.coord(2, iz) : 0.0;
    for (int ix = 0; ix < nx; ++ix) {
      const double x = grid.coord(0, ix);
      if (mask) {
        const double d2 = sq(x - su.C[0]) + sq(y - su.C[1]) + sq(z - su.C[2]);
        if (d2 >= sq(su.R)) continue;
      }
      double acc = 0;
      for (int i = 0; i < ndet; ++i) {
        const auto& p = geom.pos[i];
        const double dx = x - p[0], dy = y - p[1], dz = z - p[2];
        const double t = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double te = std::max(t, tiny);
        acc += geom.weight[i] * tab_interp(tab[i], t / su.dr) * weight(i, x, y, z, te);
      }
      out.v[grid.index(ix, iy, iz)] = prefac * acc;
    }
  });
  return out;
}

// Discrete Laplacian of u (on the padded grid) onto the original grid.
ScalarField laplacian_of_padded(const ScalarField& u, const GridSpec& grid) {
  ScalarField out(grid);
  const GridSpec& p = u.grid;
  for (int iz = 0; iz < grid.shape[2]; ++iz)
    for (int iy = 0; iy < grid.shape[1]; ++iy)
      for (int ix = 0; ix < grid.shape[0]; ++ix) {
        const int px = ix + 1, py = iy + 1, pz = grid.n == 3 ? iz + 1 : 0;
        double lap = (u.at(px - 1, py, pz) - 2 * u.at(px, py, pz) + u.at(px + 1, py, pz)) /
                     sq(p.spacing[0]);
        lap += (u.at(px, py - 1, pz) - 2 * u.at(px, py, pz) + u.at(px, py + 1, pz)) /
               sq(p.spacing[1]);
        if (grid.n == 3)
          lap += (u.at(px, py, pz - 1) - 2 * u.at(px, py, pz) + u.at(px, py, pz + 1)) /
                 sq(p.spacing[2]);
        out.at(ix, iy, iz) = lap;
      }
  return out;
}

void mask_outside(ScalarField& f, const std::array<double, 3>& C, double R) {
  const GridSpec& g = f.grid;
  for (int iz = 0; iz < g.shape[2]; ++iz)
    for (int iy = 0; iy < g.shape[1]; ++iy)
      for (int ix = 0; ix < g.shape[0]; ++ix) {
        const double d2 = sq(g.coord(0, ix) - C[0]) + sq(g.coord(1, iy) - C[1]) +
                          (g.n == 3 ? sq(g.coord(2, iz) - C[2]) : 0.0);
        if (d2 >= sq(R)) f.at(ix, iy, iz) = 0;
      }
}

// Number of radial table entries needed to cover every |x - y| that the
// (possibly padded) grid can request from detectors.
int table_len(const Setup& su, const GridSpec& grid) {
  const double tmax = su.gi.geom.max_distance_to(grid);
  return static_cast<int>(std::ceil(tmax / su.dr)) + 3;
}

// out[k] = int_0^{rmax} phi(r) log|r^2 - t_k^2| dr, t_k = k*dr, exact for
// piecewise-linear phi (cellwise antiderivatives of log|r -+ t|).
std::vector<double> log_kernel_integral(const double* phi, int nr, double dr, int nt) {
  auto G = [](double u) { return u == 0 ? 0.0 : u * (std::log(std::abs(u)) - 1.0); };
  auto K = [](double u) {
    return u == 0 ? 0.0 : u * u * (0.5 * std::log(std::abs(u)) - 0.25);
  };
  std::vector<double> out(nt);
  for (int k = 0; k < nt; ++k) {
    const double t = k * dr;
    double acc = 0;
    for (int j = 0; j + 1 < nr; ++j) {
      const double r0 = j * dr, r1 = r0 + dr;
      const double B = (phi[j + 1] - phi[j]) / dr;
      // log|r - t| part: phi(r) = alpha + B*(r - t)
      const double alpha = phi[j] + B * (t - r0);
      acc += alpha * (G(r1 - t) - G(r0 - t)) + B * (K(r1 - t) - K(r0 - t));
      // log(r + t) part: phi(r) = beta + B*(r + t)
      const double beta = phi[j] - B * (t + r0);
      acc += beta * (G(r1 + t) - G(r0 + t)) + B * (K(r1 + t) - K(r0 + t));
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

double radial_kernel_j(int n, double t) {
  require(t >= 0, "radial kernel: t must be nonnegative");
  if (n == 2) return std::cyl_bessel_j(0, t);
  if (t < 1e-8) return sqrt_2_over_pi * (1.0 - t * t / 6.0);
  return sqrt_2_over_pi * std::sin(t) / t;
}

double radial_kernel_y(int n, double t) {
  require(t > 0, "radial kernel: Neumann part needs t > 0");
  if (n == 2) return std::cyl_neumann(0, t);
  return -sqrt_2_over_pi * std::cos(t) / t;
}

std::vector<std::vector<double>> kun2d_filter(const SphericalSinogram& sino, int nt,
                                              int threads) {
  // q(y,t) = PV int g(y,r)/(r^2 - t^2) dr, via 1/(r^2-t^2) =
  // (1/2t)[1/(r-t) - 1/(r+t)] and the frequency-domain Hilbert transform on a
  // zero-padded line; returns rows of d/dt q.
  require(nt >= 4, "kun2d_filter: table too short");
  const SphericalSinogram gi = sino.to_convention(RadialConvention::integral);
  const int nr = gi.nr, ndet = static_cast<int>(gi.geom.size());
  const double dr = gi.dr;
  const int N = next_pow2(std::max(8 * std::max(nr, nt), 64));
  std::vector<std::vector<double>> qd(ndet);
  parallel_for(0, ndet, threads, [&](int i) {
    std::vector<double> padded(N, 0.0), H(N);
    const double* g = gi.row(i);
    for (int j = 0; j < nr; ++j) padded[j] = g[j];
    fftu::hilbert(padded.data(), H.data(), N);
    std::vector<double> q(nt);
    for (int j = 1; j < nt; ++j)
      q[j] = (pi / (2.0 * j * dr)) * (H[N - j] - H[j]);
    q[0] = extrap0(q.data());
    qd[i] = drow(q, dr);
  });
  return qd;
}

ScalarField invert_fbp_2d(const SphericalSinogram& sino, const GridSpec& grid,
                          Fbp2dFormula formula, const FbpOptions& opts) {
  Setup su = prepare(sino, grid, GeometryKind::circle);
  const int nr = su.nr, ndet = static_cast<int>(su.gi.geom.size());
  const double dr = su.dr;

  if (formula == Fbp2dFormula::kun2d) {
    const int nt = table_len(su, grid);
    const std::vector<std::vector<double>> qd = kun2d_filter(su.gi, nt, opts.threads);
    return backproject(su, grid, qd, 1.0 / (2.0 * pi * pi), opts.threads, true,
                       [&](int i, double x, double y, double, double te) {
                         const auto& n = su.gi.geom.normal[i];
                         const auto& p = su.gi.geom.pos[i];
                         return (n[0] * (x - p[0]) + n[1] * (y - p[1])) / te;
                       });
  }

  // Log-kernel formulas. The log filter acts on r * (surface mean) = g / (2pi)
  // for integral-convention data, so the 1/(2pi) is folded into the prefactor.
  const double log_pre = 1.0 / (4.0 * pi * pi * su.R);
  const GridSpec padded = pad_grid(grid);
  const int nt = table_len(su, padded);
  std::vector<std::vector<double>> L(ndet);
  const bool deriv = formula == Fbp2dFormula::finch_deriv;
  parallel_for(0, ndet, opts.threads, [&](int i) {
    const double* g = su.gi.row(i);
    if (deriv) {
      // filter d/dr ( r * d/dr (g/r) ) applied to the data first
      std::vector<double> a = row_over_r(g, nr, dr);
      std::vector<double> b = drow(a, dr);
      for (int j = 0; j < nr; ++j) b[j] *= j * dr;
      std::vector<double> phi = drow(b, dr);
      L[i] = log_kernel_integral(phi.data(), nr, dr, nt);
    } else {
      L[i] = log_kernel_integral(g, nr, dr, nt);
    }
  });
  auto unit = [](int, double, double, double, double) { return 1.0; };
  if (deriv) {
    ScalarField f = backproject(su, grid, L, log_pre, opts.threads, true, unit);
    return f;
  }
  ScalarField u = backproject(su, padded, L, log_pre, opts.threads, false, unit);
  ScalarField f = laplacian_of_padded(u, grid);
  mask_outside(f, su.C, su.R);
  return f;
}

ScalarField invert_fbp_3d(const SphericalSinogram& sino, const GridSpec& grid,
                          Fbp3dFormula formula, const FbpOptions& opts) {
  Setup su = prepare(sino, grid, GeometryKind::sphere);
  const int nr = su.nr, ndet = static_cast<int>(su.gi.geom.size());
  const double dr = su.dr;
  const double pre = -1.0 / (8.0 * pi * pi * su.R);

  if (formula == Fbp3dFormula::fpr_laplacian) {
    const GridSpec padded = pad_grid(grid);
    std::vector<std::vector<double>> tab(ndet);
    parallel_for(0, ndet, opts.threads, [&](int i) {
      tab[i].assign(su.gi.row(i), su.gi.row(i) + nr);
    });
    ScalarField u = backproject(su, padded, tab, pre, opts.threads, false,
                                [](int, double, double, double, double te) {
                                  return 1.0 / te;
                                });
    ScalarField f = laplacian_of_padded(u, grid);
    mask_outside(f, su.C, su.R);
    return f;
  }

  std::vector<std::vector<double>> tab(ndet);
  switch (formula) {
    case Fbp3dFormula::fpr_dderiv:
      parallel_for(0, ndet, opts.threads, [&](int i) {
        std::vector<double> g(su.gi.row(i), su.gi.row(i) + nr);
        tab[i] = drow(drow(g, dr), dr);
      });
      return backproject(su, grid, tab, pre, opts.threads, true,
                         [](int, double, double, double, double te) {
                           return 1.0 / te;
                         });
    case Fbp3dFormula::fpr_mixed:
      parallel_for(0, ndet, opts.threads, [&](int i) {
        std::vector<double> a = row_over_r(su.gi.row(i), nr, dr);
        std::vector<double> b = drow(a, dr);
        for (int j = 0; j < nr; ++j) b[j] *= j * dr;
        std::vector<double> d = drow(b, dr);
        for (int j = 1; j < nr; ++j) d[j] /= j * dr;
        d[0] = extrap0(d.data());
        tab[i] = std::move(d);
      });
      return backproject(su, grid, tab, pre, opts.threads, true,
                         [](int, double, double, double, double) { return 1.0; });
    case Fbp3dFormula::universal:
    case Fbp3dFormula::nguyen: {
      for (int a = 0; a < 3; ++a)
        require(std::isfinite(opts.xi[a]), "fbp: xi must be finite");
      parallel_for(0, ndet, opts.threads, [&](int i) {
        std::vector<double> a = row_over_r(su.gi.row(i), nr, dr);
        std::vector<double> F = drow(a, dr);
        for (int j = 1; j < nr; ++j) F[j] /= j * dr;
        F[0] = extrap0(F.data());
        tab[i] = drow(F, dr);
      });
      if (formula == Fbp3dFormula::universal) {
        // -(1/8pi^2) * sum w_i F'(t) * n.(y-x)/t  (normal derivative form)
        return backproject(su, grid, tab, -1.0 / (8.0 * pi * pi), opts.threads, true,
                           [&](int i, double x, double y, double z, double te) {
                             const auto& n = su.gi.geom.normal[i];
                             const auto& p = su.gi.geom.pos[i];
                             return (n[0] * (p[0] - x) + n[1] * (p[1] - y) +
                                     n[2] * (p[2] - z)) /
                                    te;
                           });
      }
      const auto xi = opts.xi;
      return backproject(su, grid, tab, pre, opts.threads, true,
                         [&](int i, double x, double y, double z, double te) {
                           const auto& p = su.gi.geom.pos[i];
                           return ((p[0] - x) * (p[0] - xi[0]) +
                                   (p[1] - y) * (p[1] - xi[1]) +
                                   (p[2] - z) * (p[2] - xi[2])) /
                                  te;
                         });
    }
    default:
      break;
  }
  require(false, "fbp: unknown 3-D formula");
  return ScalarField(grid);
}

ScalarField invert_fbp_nd(const SphericalSinogram& sino, const GridSpec& grid,
                          const FbpNdOptions& opts) {
  const int n = sino.geom.n;
  Setup su = prepare(sino, grid,
                     n == 2 ? GeometryKind::circle : GeometryKind::sphere);
  const int nr = su.nr, ndet = static_cast<int>(su.gi.geom.size());
  const double dr = su.dr;
  const int nt = table_len(su, grid);
  const double rmax = su.gi.r_max(), tmax = (nt - 1) * dr;

  // Truncated lambda integral: reject grids too coarse to resolve the data
  // oscillations (4 nodes per period at the largest combined radius) or
  // extending beyond the radial Nyquist frequency.
  const double lam_max_limit = pi / dr;
  const double lam_step_limit = pi / (2.0 * (rmax + tmax));
  const double lam_max = opts.lambda_max > 0 ? opts.lambda_max : lam_max_limit;
  const double lam_step = opts.lambda_step > 0 ? opts.lambda_step : lam_step_limit;
  require(lam_max <= lam_max_limit * (1 + 1e-9),
          "fbp_nd: lambda_max beyond the radial Nyquist limit");
  require(lam_step <= lam_step_limit * (1 + 1e-9),
          "fbp_nd: lambda grid too coarse for the radial sampling");
  const int nl = static_cast<int>(std::floor(lam_max / lam_step));
  require(nl >= 8, "fbp_nd: lambda grid too short");

  // Kernel tables over (lambda, r) and (lambda, t); trapezoid weights folded
  // into the r tables. Y*g at r=0 is 0 since g(0)=0 in integral convention.
  std::vector<double> Jr(static_cast<std::size_t>(nl) * nr),
      Yr(static_cast<std::size_t>(nl) * nr), Jt(static_cast<std::size_t>(nl) * nt),
      Yt(static_cast<std::size_t>(nl) * nt);
  parallel_for(0, nl, opts.threads, [&](int l) {
    const double lam = (l + 0.5) * lam_step;
    for (int j = 0; j < nr; ++j) {
      const double w = (j == 0 || j == nr - 1) ? 0.5 * dr : dr;
      Jr[l * static_cast<std::size_t>(nr) + j] = radial_kernel_j(n, lam * j * dr) * w;
      Yr[l * static_cast<std::size_t>(nr) + j] =
          j == 0 ? 0.0 : radial_kernel_y(n, lam * j * dr) * w;
    }
    for (int k = 0; k < nt; ++k) {
      Jt[l * static_cast<std::size_t>(nt) + k] = radial_kernel_j(n, lam * k * dr);
      Yt[l * static_cast<std::size_t>(nt) + k] =
          k == 0 ? 0.0 : radial_kernel_y(n, lam * k * dr);
    }
  });

  std::vector<std::vector<double>> hd(ndet);
  parallel_for(0, ndet, opts.threads, [&](int i) {
    const double* g = su.gi.row(i);
    std::vector<double> cj(nl), cy(nl);
    for (int l = 0; l < nl; ++l) {
      double sj = 0, sy = 0;
      const double* jr = &Jr[l * static_cast<std::size_t>(nr)];
      const double* yr = &Yr[l * static_cast<std::size_t>(nr)];
      for (int j = 0; j < nr; ++j) {
        sj += jr[j] * g[j];
        sy += yr[j] * g[j];
      }
      cj[l] = sj;
      cy[l] = sy;
    }
    std::vector<double> h(nt, 0.0);
    for (int l = 0; l < nl; ++l) {
      const double lam = (l + 0.5) * lam_step;
      const double mom = std::pow(lam, 2 * n - 3) * lam_step;
      const double a = mom * cy[l], b = mom * cj[l];
      const double* jt = &Jt[l * static_cast<std::size_t>(nt)];
      const double* yt = &Yt[l * static_cast<std::size_t>(nt)];
      for (int k = 1; k < nt; ++k) h[k] += jt[k] * a - yt[k] * b;
    }
    h[0] = extrap0(h.data());
    hd[i] = drow(h, dr);
  });

  const double prefac = 1.0 / (4.0 * std::pow(2.0 * pi, n - 1));
  return backproject(su, grid, hd, prefac, opts.threads, true,
                     [&](int i, double x, double y, double z, double te) {
                       const auto& nn = su.gi.geom.normal[i];
                       const auto& p = su.gi.geom.pos[i];
                       double d = nn[0] * (x - p[0]) + nn[1] * (y - p[1]);
                       if (n == 3) d += nn[2] * (z - p[2]);
                       return d / te;
                     });
}

SphericalSinogram smooth_filter(const SphericalSinogram& s, double cutoff,
                                double rolloff) {
  s.validate();
  SphericalSinogram out = s;
  for (std::size_t i = 0; i < s.geom.size(); ++i)
    fftu::lowpass(out.row(i), out.nr, cutoff, rolloff);
  return out;
}

}  // namespace tatk
