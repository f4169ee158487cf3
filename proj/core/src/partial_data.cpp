#include "tatk/partial_data.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "tatk/analysis.hpp"
#include "tatk/fbp.hpp"
#include "tatk/forward.hpp"
#include "tatk/io_json.hpp"
#include "tatk/io_tatf.hpp"
#include "tatk/special.hpp"

extern "C" {
void dsyrk_(const char* uplo, const char* trans, const int* n, const int* k,
            const double* alpha, const double* a, const int* lda, const double* beta,
            double* c, const int* ldc);
void dgemv_(const char* trans, const int* m, const int* n, const double* alpha,
            const double* a, const int* lda, const double* x, const int* incx,
            const double* beta, double* y, const int* incy);
}

namespace tatk {
namespace {

using cplx = std::complex<double>;

double bessel_j0(double x) { return std::cyl_bessel_j(0, x); }
double bessel_y0(double x) { return std::cyl_neumann(0, x); }

std::array<double, 3> fib_dir(int i, int count) {
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  const double z = 1.0 - (2.0 * i + 1.0) / count;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double phi = 2.0 * pi * std::fmod(i / golden, 1.0);
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

double extrap0(const double* a) { return 3.0 * a[1] - 3.0 * a[2] + a[3]; }

// clamped linear table lookup, u in index units
double tab_interp(const std::vector<double>& tab, double u) {
  const int n = static_cast<int>(tab.size());
  if (u <= 0) return tab[0];
  if (u >= n - 1) return tab[n - 1];
  const int j = static_cast<int>(u);
  const double a = u - j;
  return (1 - a) * tab[j] + a * tab[j + 1];
}

std::vector<double> drow(const std::vector<double>& a, double h) {
  std::vector<double> out(a.size());
  derivative_4th(a.data(), static_cast<int>(a.size()), h, out.data());
  return out;
}

}  // namespace

// --- XiGrid ----------------------------------------------------------------------

XiGrid XiGrid::uniform(double lambda_max, int n_mag, int n_dir) {
  require(lambda_max > 0 && n_mag >= 4 && n_dir >= 2, "XiGrid: bad parameters");
  XiGrid g;
  g.directions = n_dir;
  for (int q = 0; q < n_mag; ++q)
    g.magnitudes.push_back((q + 1) * lambda_max / n_mag);
  return g;
}

void XiGrid::validate() const {
  require(directions >= 2, "XiGrid: need at least 2 directions");
  require(magnitudes.size() >= 4, "XiGrid: need at least 4 magnitudes");
  double smallest_nonzero = 0;
  for (double l : magnitudes) {
    require(std::isfinite(l) && l >= 0, "XiGrid: magnitudes must be finite and >= 0");
    if (l > 0 && (smallest_nonzero == 0 || l < smallest_nonzero)) smallest_nonzero = l;
  }
  const double lambda_floor = 0.5 * smallest_nonzero;
  for (std::size_t q = 0; q < magnitudes.size(); ++q) {
    require(magnitudes[q] > 0 && magnitudes[q] >= lambda_floor,
            "XiGrid: |xi| below lambda_floor (half the smallest nonzero magnitude) "
            "is rejected: the Neumann kernel is singular as |xi| -> 0");
    if (q > 0)
      require(magnitudes[q] > magnitudes[q - 1], "XiGrid: magnitudes must ascend");
  }
}

// --- densities -------------------------------------------------------------------

void PlaneWaveDensities::validate() const {
  geom.validate();
  xi.validate();
  const std::size_t nxi = xi.magnitudes.size() * xi.directions;
  require(rho_j.size() == nxi && rho_y.size() == nxi && residual.size() == nxi,
          "densities: array sizes do not match the xi grid");
  for (double r : residual)
    require(std::isfinite(r), "densities: non-finite residual");
  for (std::size_t k = 0; k < nxi; ++k) {
    double n2 = 0;
    for (const cplx& v : rho_j[k]) n2 += std::norm(v);
    for (const cplx& v : rho_y[k]) n2 += std::norm(v);
    require(std::isfinite(n2) && std::sqrt(n2) <= norm_cap * (1 + 1e-9),
            "densities: density norm exceeds the declared cap");
  }
}

PlaneWaveDensities precompute_densities(const AcquisitionGeometry& geom,
                                        const GridSpec& omega, const XiGrid& xi,
                                        const DensityOptions& opts) {
  geom.validate();
  omega.validate();
  xi.validate();
  require(geom.n == 2 && omega.n == 2,
          "precompute_densities: the plane-wave method is 2-D");
  require(!geom.closed(),
          "precompute_densities expects an open geometry (circular arc)");

  const int m = static_cast<int>(geom.size());
  const int ncol = static_cast<int>(omega.size());
  const int nu = 2 * m;  // unknowns: J and Y densities
  require(ncol >= nu, "precompute_densities: collocation grid underdetermined "
                      "(fewer points than density unknowns)");
  require(ncol <= 200000, "precompute_densities: collocation grid too large");

  // collocation points
  std::vector<std::array<double, 2>> xc(ncol);
  {
    int k = 0;
    for (int iy = 0; iy < omega.shape[1]; ++iy)
      for (int ix = 0; ix < omega.shape[0]; ++ix)
        xc[k++] = {omega.coord(0, ix), omega.coord(1, iy)};
  }
  const double rb = geom.bounding_radius();
  for (const auto& p : xc)
    for (int i = 0; i < m; ++i)
      require(sq(p[0] - geom.pos[i][0]) + sq(p[1] - geom.pos[i][1]) >
                  sq(1e-9 * rb),
              "precompute_densities: a collocation point coincides with a detector");

  PlaneWaveDensities out;
  out.geom = geom;
  out.omega = omega;
  out.xi = xi;

  if (opts.check_visibility) {
    GridSpec coarse = omega;
    for (int a = 0; a < 2; ++a) {
      const int mshape = std::min(omega.shape[a], 17);
      coarse.shape[a] = mshape;
      coarse.spacing[a] = (omega.coord(a, omega.shape[a] - 1) - omega.origin[a]) /
                          (mshape - 1);
    }
    const VisibilityMap vm =
        visibility_map(SoundSpeedField::constant(1.0), geom, coarse, 24, opts.threads);
    const double worst = *std::min_element(vm.fraction.begin(), vm.fraction.end());
    if (worst < 1.0 - 1e-12) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "part of the target region is invisible from the acquisition "
                    "curve (worst direction coverage %.3f)",
                    worst);
      out.warning = buf;
    }
  }

  const int Q = static_cast<int>(xi.magnitudes.size()), D = xi.directions;
  out.rho_j.assign(static_cast<std::size_t>(Q) * D, {});
  out.rho_y.assign(static_cast<std::size_t>(Q) * D, {});
  out.residual.assign(static_cast<std::size_t>(Q) * D, 0.0);

  std::vector<double> reg_used(Q, 0.0), cap_used(Q, 0.0);
  parallel_for(0, Q, opts.threads, [&](int q) {
    const double lam = xi.magnitudes[q];
    // column-major A: ncol rows, 2m columns (J block then Y block)
    std::vector<double> A(static_cast<std::size_t>(ncol) * nu);
    for (int i = 0; i < m; ++i) {
      const double wi = geom.weight[i];
      const double yx = geom.pos[i][0], yy = geom.pos[i][1];
      double* colj = A.data() + static_cast<std::size_t>(i) * ncol;
      double* coly = A.data() + static_cast<std::size_t>(m + i) * ncol;
      for (int r = 0; r < ncol; ++r) {
        const double d = std::sqrt(sq(xc[r][0] - yx) + sq(xc[r][1] - yy));
        colj[r] = wi * bessel_j0(lam * d);
        coly[r] = wi * bessel_y0(lam * d);
      }
    }
    std::vector<double> G(static_cast<std::size_t>(nu) * nu, 0.0);
    const double one = 1.0, zero = 0.0;
    dsyrk_("L", "T", &nu, &ncol, &one, A.data(), &ncol, &zero, G.data(), &nu);
    double maxdiag = 0;
    for (int c = 0; c < nu; ++c)
      maxdiag = std::max(maxdiag, G[static_cast<std::size_t>(c) * nu + c]);
    const double reg = opts.reg > 0 ? opts.reg : 1e-6 * maxdiag;
    reg_used[q] = reg;
    cap_used[q] = std::sqrt(static_cast<double>(ncol) / reg);
    for (int c = 0; c < nu; ++c) G[static_cast<std::size_t>(c) * nu + c] += reg;
    require(LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', nu, G.data(), nu) == 0,
            "precompute_densities: normal equations not positive definite");

    std::vector<double> bre(ncol), bim(ncol), rhs(2 * static_cast<std::size_t>(nu)),
        fit(ncol);
    const int ione = 1;
    for (int d = 0; d < D; ++d) {
      const double th = pi * d / D;
      const double ux = std::cos(th), uy = std::sin(th);
      for (int r = 0; r < ncol; ++r) {
        const double phase = -lam * (ux * xc[r][0] + uy * xc[r][1]);
        bre[r] = std::cos(phase);
        bim[r] = std::sin(phase);
      }
      dgemv_("T", &ncol, &nu, &one, A.data(), &ncol, bre.data(), &ione, &zero,
             rhs.data(), &ione);
      dgemv_("T", &ncol, &nu, &one, A.data(), &ncol, bim.data(), &ione, &zero,
             rhs.data() + nu, &ione);
      require(LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', nu, 2, G.data(), nu, rhs.data(),
                             nu) == 0,
              "precompute_densities: solve failed");

      const std::size_t k = static_cast<std::size_t>(q) * D + d;
      auto& rj = out.rho_j[k];
      auto& ry = out.rho_y[k];
      rj.resize(m);
      ry.resize(m);
      for (int i = 0; i < m; ++i) {
        rj[i] = cplx(rhs[i], rhs[nu + i]);
        ry[i] = cplx(rhs[m + i], rhs[nu + m + i]);
      }
      double res2 = 0;
      for (int part = 0; part < 2; ++part) {
        const double* sol = rhs.data() + part * nu;
        const double* b = part ? bim.data() : bre.data();
        dgemv_("N", &ncol, &nu, &one, A.data(), &ncol, sol, &ione, &zero, fit.data(),
               &ione);
        for (int r = 0; r < ncol; ++r) res2 += sq(fit[r] - b[r]);
      }
      out.residual[k] = std::sqrt(res2 / ncol);
    }
  });

  out.reg = opts.reg > 0 ? opts.reg : *std::max_element(reg_used.begin(), reg_used.end());
  out.norm_cap = *std::max_element(cap_used.begin(), cap_used.end());
  out.validate();
  return out;
}

// --- cache -----------------------------------------------------------------------

std::string densities_cache_key(const AcquisitionGeometry& geom, const XiGrid& xi,
                                double reg) {
  std::uint64_t h = geom.content_hash();
  if (!xi.magnitudes.empty())
    h = fnv1a(xi.magnitudes.data(), xi.magnitudes.size() * sizeof(double), h);
  h = fnv1a(&xi.directions, sizeof xi.directions, h);
  h = fnv1a(&reg, sizeof reg, h);
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_densities_tatf(const std::string& path, const PlaneWaveDensities& d) {
  d.validate();
  const int m = static_cast<int>(d.geom.size());
  const std::size_t nxi = d.rho_j.size();
  nlohmann::json h;
  h["kind"] = "densities";
  h["shape"] = {static_cast<long>(nxi), 2L, static_cast<long>(m), 2L};
  h["geometry"] = geometry_to_json(d.geom);
  h["omega"] = {{"n", d.omega.n},
                {"shape", d.omega.shape},
                {"origin", d.omega.origin},
                {"spacing", d.omega.spacing}};
  h["magnitudes"] = d.xi.magnitudes;
  h["directions"] = d.xi.directions;
  h["reg"] = d.reg;
  h["norm_cap"] = d.norm_cap;
  h["warning"] = d.warning;
  h["residual"] = d.residual;
  std::vector<double> payload;
  payload.reserve(nxi * 4 * m);
  for (std::size_t k = 0; k < nxi; ++k) {
    for (const cplx& v : d.rho_j[k]) {
      payload.push_back(v.real());
      payload.push_back(v.imag());
    }
    for (const cplx& v : d.rho_y[k]) {
      payload.push_back(v.real());
      payload.push_back(v.imag());
    }
  }
  tatf_detail::write_tatf(path, h, payload.data(), payload.size());
}

PlaneWaveDensities read_densities_tatf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open " + path);
  const nlohmann::json h = tatf_detail::read_header(in, path);
  require(h.at("kind") == "densities", path + ": not a densities file");
  PlaneWaveDensities d;
  d.geom = geometry_from_json(h.at("geometry"));
  const auto& jg = h.at("omega");
  d.omega.n = jg.at("n").get<int>();
  d.omega.shape = jg.at("shape").get<std::array<int, 3>>();
  d.omega.origin = jg.at("origin").get<std::array<double, 3>>();
  d.omega.spacing = jg.at("spacing").get<std::array<double, 3>>();
  d.xi.magnitudes = h.at("magnitudes").get<std::vector<double>>();
  d.xi.directions = h.at("directions").get<int>();
  d.reg = h.at("reg").get<double>();
  d.norm_cap = h.at("norm_cap").get<double>();
  d.warning = h.at("warning").get<std::string>();
  d.residual = h.at("residual").get<std::vector<double>>();
  const int m = static_cast<int>(d.geom.size());
  const std::size_t nxi = d.xi.magnitudes.size() * d.xi.directions;
  const std::vector<double> payload =
      tatf_detail::read_payload(in, path, nxi * 4 * m);
  d.rho_j.assign(nxi, {});
  d.rho_y.assign(nxi, {});
  std::size_t p = 0;
  for (std::size_t k = 0; k < nxi; ++k) {
    d.rho_j[k].resize(m);
    d.rho_y[k].resize(m);
    for (int i = 0; i < m; ++i, p += 2) d.rho_j[k][i] = cplx(payload[p], payload[p + 1]);
    for (int i = 0; i < m; ++i, p += 2) d.rho_y[k][i] = cplx(payload[p], payload[p + 1]);
  }
  d.validate();
  return d;
}

// --- plane-wave inversion ----------------------------------------------------------

ScalarField invert_planewave(const SphericalSinogram& sino, const PlaneWaveDensities& dens,
                             const GridSpec& grid, const PlaneWaveInvertOptions& opts) {
  sino.validate();
  dens.validate();
  grid.validate();
  require(grid.n == 2, "invert_planewave: 2-D only");
  require(sino.geom.content_hash() == dens.geom.content_hash(),
          "invert_planewave: sinogram geometry does not match the densities");
  const SphericalSinogram gi = sino.to_convention(RadialConvention::integral);
  const int nr = gi.nr, m = static_cast<int>(gi.geom.size());
  const double dr = gi.dr;
  const int Q = static_cast<int>(dens.xi.magnitudes.size()), D = dens.xi.directions;
  const auto& lam = dens.xi.magnitudes;

  // sampling checks: the polar grid must resolve the extent of the target
  double ext = 0;
  for (int cx = 0; cx < 2; ++cx)
    for (int cy = 0; cy < 2; ++cy)
      ext = std::max(ext, std::hypot(grid.coord(0, cx * (grid.shape[0] - 1)),
                                     grid.coord(1, cy * (grid.shape[1] - 1))));
  double maxgap = lam[0];
  for (int q = 1; q < Q; ++q) maxgap = std::max(maxgap, lam[q] - lam[q - 1]);
  require(maxgap * ext <= pi * (1 + 1e-9),
          "invert_planewave: xi magnitude spacing too coarse for the target grid "
          "(aliasing)");
  require(D >= std::max(4.0, std::ceil(lam.back() * ext / pi)),
          "invert_planewave: too few xi directions for the target grid (aliasing)");

  // data moments against the two radial kernels
  std::vector<double> mj(static_cast<std::size_t>(Q) * m), my(mj.size());
  parallel_for(0, Q, opts.threads, [&](int q) {
    for (int i = 0; i < m; ++i) {
      const double* row = gi.row(i);
      double aj = 0, ay = 0;
      for (int j = 1; j < nr; ++j) {
        const double r = j * dr;
        const double w = (j == nr - 1) ? 0.5 : 1.0;
        aj += w * bessel_j0(lam[q] * r) * row[j];
        ay += w * bessel_y0(lam[q] * r) * row[j];
      }
      mj[static_cast<std::size_t>(q) * m + i] = aj * dr;
      my[static_cast<std::size_t>(q) * m + i] = ay * dr;
    }
  });

  // transform samples on the polar grid
  std::vector<cplx> fhat(static_cast<std::size_t>(Q) * D);
  parallel_for(0, Q, opts.threads, [&](int q) {
    for (int d = 0; d < D; ++d) {
      const std::size_t k = static_cast<std::size_t>(q) * D + d;
      cplx acc = 0;
      for (int i = 0; i < m; ++i) {
        acc += gi.geom.weight[i] * (dens.rho_j[k][i] * mj[static_cast<std::size_t>(q) * m + i] +
                                    dens.rho_y[k][i] * my[static_cast<std::size_t>(q) * m + i]);
      }
      fhat[k] = acc;
    }
  });

  // polar Fourier inversion: uniform angles, trapezoid in the magnitude plus
  // a quadratic head on [0, lam_0] extrapolated from the three smallest
  // magnitudes per direction
  const bool unif = [&] {
    for (int q = 1; q < Q; ++q)
      if (std::abs((lam[q] - lam[q - 1]) - lam[0]) > 1e-9 * lam[0]) return false;
    return true;
  }();
  std::vector<double> wl(Q);
  for (int q = 0; q < Q; ++q) {
    const double left = q == 0 ? 0.0 : 0.5 * (lam[q] - lam[q - 1]);
    const double right = q + 1 < Q ? 0.5 * (lam[q + 1] - lam[q]) : 0.0;
    wl[q] = left + right;
  }
  std::vector<double> gl_x, gl_w;
  gauss_legendre(6, gl_x, gl_w);

  ScalarField out(grid);
  const int nx = grid.shape[0], ny = grid.shape[1];
  parallel_for(0, ny, opts.threads, [&](int iy) {
    const double y = grid.coord(1, iy);
    for (int ix = 0; ix < nx; ++ix) {
      const double x = grid.coord(0, ix);
      double acc = 0;
      for (int d = 0; d < D; ++d) {
        const double th = pi * d / D;
        const double s = x * std::cos(th) + y * std::sin(th);
        const cplx* fd = fhat.data() + d;
        if (unif) {
          const cplx step = std::polar(1.0, lam[0] * s);
          cplx ph = step;
          for (int q = 0; q < Q; ++q) {
            const cplx v = fd[static_cast<std::size_t>(q) * D];
            acc += 2.0 * (v.real() * ph.real() - v.imag() * ph.imag()) * lam[q] * wl[q];
            ph *= step;
          }
        } else {
          for (int q = 0; q < Q; ++q) {
            const cplx v = fd[static_cast<std::size_t>(q) * D];
            const cplx ph = std::polar(1.0, lam[q] * s);
            acc += 2.0 * (v.real() * ph.real() - v.imag() * ph.imag()) * lam[q] * wl[q];
          }
        }
        // head [0, lam_0]: quadratic through the three smallest magnitudes
        const cplx f0 = fd[0], f1 = fd[static_cast<std::size_t>(D)],
                   f2 = fd[static_cast<std::size_t>(2) * D];
        const double l0 = lam[0], l1 = lam[1], l2 = lam[2];
        for (int gq = 0; gq < 6; ++gq) {
          const double l = 0.5 * l0 * (gl_x[gq] + 1.0);
          const double w = 0.5 * l0 * gl_w[gq];
          const double c0 = (l - l1) * (l - l2) / ((l0 - l1) * (l0 - l2));
          const double c1 = (l - l0) * (l - l2) / ((l1 - l0) * (l1 - l2));
          const double c2 = (l - l0) * (l - l1) / ((l2 - l0) * (l2 - l1));
          const cplx v = c0 * f0 + c1 * f1 + c2 * f2;
          const cplx ph = std::polar(1.0, l * s);
          acc += 2.0 * (v.real() * ph.real() - v.imag() * ph.imag()) * l * w;
        }
      }
      out.at(ix, iy) = acc * (pi / D) / (4.0 * pi * pi);
    }
  });
  return out;
}

// --- zero fill ---------------------------------------------------------------------

double arc_coverage(const AcquisitionGeometry& geom, double theta, double taper_frac) {
  require(geom.kind == GeometryKind::arc || geom.kind == GeometryKind::circle,
          "arc_coverage: needs a circular arc geometry");
  if (geom.kind == GeometryKind::circle) return 1.0;
  const double span = geom.theta1 - geom.theta0;
  if (span >= 2 * pi - 1e-9) return 1.0;
  double t = theta - geom.theta0;
  t -= std::floor(t / (2 * pi)) * 2 * pi;
  if (t > span) return 0.0;
  const double w = std::max(taper_frac, 0.0) * span;
  if (w <= 0) return 1.0;
  const double e = std::min(t, span - t);
  return e >= w ? 1.0 : 0.5 * (1.0 - std::cos(pi * e / w));
}

std::array<double, 2> zero_fill_pair_weights(const AcquisitionGeometry& geom,
                                             const std::array<double, 3>& x, int det,
                                             double taper_frac) {
  require(geom.n == 2, "zero_fill_pair_weights: 2-D only");
  require(det >= 0 && det < static_cast<int>(geom.size()),
          "zero_fill_pair_weights: detector index out of range");
  const auto& y = geom.pos[det];
  const auto& C = geom.center;
  const double dx = x[0] - y[0], dy = x[1] - y[1];
  const double len = std::hypot(dx, dy);
  if (len < 1e-14) return {1.0, 0.0};
  const double ux = dx / len, uy = dy / len;
  // second intersection of the chord with the circle (the first is y itself)
  const double t2 = -2.0 * ((y[0] - C[0]) * ux + (y[1] - C[1]) * uy);
  const double bx = y[0] + t2 * ux, by = y[1] + t2 * uy;
  const double eta = arc_coverage(geom, std::atan2(y[1] - C[1], y[0] - C[0]), taper_frac);
  const double etab = arc_coverage(geom, std::atan2(by - C[1], bx - C[0]), taper_frac);
  const double sum = eta + etab;
  if (sum <= 0) return {0.0, 0.0};
  return {eta / sum, etab / sum};
}

namespace {

// 3-D sub-cap support: custom geometries whose detectors lie on a sphere.
ScalarField zero_fill_cap_3d(const SphericalSinogram& gi, const GridSpec& grid,
                             const ZeroFillOptions& opts) {
  const auto& geom = gi.geom;
  const double R = geom.radius;
  require(R > 0, "invert_zero_fill: custom cap needs geometry radius/center set");
  const auto& C = geom.center;
  const int m = static_cast<int>(geom.size());
  for (int i = 0; i < m; ++i) {
    const double d = std::sqrt(sq(geom.pos[i][0] - C[0]) + sq(geom.pos[i][1] - C[1]) +
                               sq(geom.pos[i][2] - C[2]));
    require(std::abs(d - R) <= 1e-6 * R,
            "invert_zero_fill: custom detectors must lie on the stated sphere");
  }
  // coverage test distance: a multiple of the median nearest-neighbor spacing
  std::vector<double> nn(m, 1e300);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i == j) continue;
      const double d2 = sq(geom.pos[i][0] - geom.pos[j][0]) +
                        sq(geom.pos[i][1] - geom.pos[j][1]) +
                        sq(geom.pos[i][2] - geom.pos[j][2]);
      nn[i] = std::min(nn[i], d2);
    }
  std::vector<double> srt = nn;
  std::nth_element(srt.begin(), srt.begin() + m / 2, srt.end());
  const double cover_dist2 = sq(2.5) * srt[m / 2];

  // universal-formula filter: tables of d/dt F, F = (1/r) d/dr (g/r)
  const int nr = gi.nr;
  const double dr = gi.dr;
  const int nt =
      static_cast<int>(std::ceil(geom.max_distance_to(grid) / dr)) + 3;
  std::vector<std::vector<double>> tab(m);
  parallel_for(0, m, opts.threads, [&](int i) {
    const double* g = gi.row(i);
    std::vector<double> a(nr);
    for (int j = 1; j < nr; ++j) a[j] = g[j] / (j * dr);
    a[0] = extrap0(a.data());
    std::vector<double> da = drow(a, dr);
    for (int j = 1; j < nr; ++j) da[j] /= j * dr;
    da[0] = extrap0(da.data());
    std::vector<double> fd = drow(da, dr);
    fd.resize(nt, 0.0);
    tab[i] = std::move(fd);
  });

  ScalarField out(grid);
  const int nx = grid.shape[0], ny = grid.shape[1], nz = grid.shape[2];
  const bool weighted = opts.weighting == ZeroFillWeighting::direction;
  parallel_for(0, ny * nz, opts.threads, [&](int row) {
    const int iy = row % ny, iz = row / ny;
    const double y = grid.coord(1, iy), z = grid.coord(2, iz);
    for (int ix = 0; ix < nx; ++ix) {
      const double x = grid.coord(0, ix);
      if (sq(x - C[0]) + sq(y - C[1]) + sq(z - C[2]) >= sq(R)) continue;
      double acc = 0;
      for (int i = 0; i < m; ++i) {
        const auto& p = geom.pos[i];
        const auto& nv = geom.normal[i];
        const double tx = p[0] - x, ty = p[1] - y, tz = p[2] - z;
        const double t = std::sqrt(tx * tx + ty * ty + tz * tz);
        const double te = std::max(t, 0.25 * dr);
        double mult = 1.0;
        if (weighted) {
          // antipodal point of the chord through x
          const double ux = -tx / std::max(t, 1e-300),
                       uy = -ty / std::max(t, 1e-300),
                       uz = -tz / std::max(t, 1e-300);
          const double t2 = -2.0 * ((p[0] - C[0]) * ux + (p[1] - C[1]) * uy +
                                    (p[2] - C[2]) * uz);
          const double qx = p[0] + t2 * ux, qy = p[1] + t2 * uy, qz = p[2] + t2 * uz;
          bool covered = false;
          for (int j = 0; j < m && !covered; ++j)
            covered = sq(qx - geom.pos[j][0]) + sq(qy - geom.pos[j][1]) +
                          sq(qz - geom.pos[j][2]) <=
                      cover_dist2;
          mult = 2.0 / (covered ? 2.0 : 1.0);
        }
        acc += mult * geom.weight[i] * tab_interp(tab[i], t / dr) *
               (nv[0] * tx + nv[1] * ty + nv[2] * tz) / te;
      }
      out.at(ix, iy, iz) = acc * (-1.0 / (8.0 * pi * pi));
    }
  });
  return out;
}

}  // namespace

ScalarField invert_zero_fill(const SphericalSinogram& sino, const GridSpec& grid,
                             const ZeroFillOptions& opts) {
  sino.validate();
  grid.validate();
  const auto& geom = sino.geom;
  require(grid.n == geom.n, "invert_zero_fill: dimension mismatch");

  if (geom.kind == GeometryKind::circle)
    return invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d, {opts.threads});
  if (geom.kind == GeometryKind::sphere)
    return invert_fbp_3d(sino, grid, Fbp3dFormula::universal, {opts.threads});

  const SphericalSinogram gi = sino.to_convention(RadialConvention::integral);
  if (geom.kind == GeometryKind::custom && geom.n == 3)
    return zero_fill_cap_3d(gi, grid, opts);
  require(geom.kind == GeometryKind::arc,
          "invert_zero_fill: geometry must be a circular sub-arc (2-D), a "
          "sub-cap on a sphere (3-D custom), or a closed surface");

  const int m = static_cast<int>(geom.size()), nr = gi.nr;
  const double dr = gi.dr, R = geom.radius;
  const auto& C = geom.center;
  const double dth = (geom.theta1 - geom.theta0) / (m - 1);

  // taper the data toward the arc edges, then filter as if on a full circle
  SphericalSinogram tapered = gi;
  std::vector<double> eta(m);
  for (int i = 0; i < m; ++i) {
    eta[i] = arc_coverage(geom, geom.theta0 + i * dth, opts.taper_frac);
    double* row = tapered.row(i);
    for (int j = 0; j < nr; ++j) row[j] *= eta[i];
  }
  const int nt = static_cast<int>(std::ceil(geom.max_distance_to(grid) / dr)) + 3;
  const std::vector<std::vector<double>> qd = kun2d_filter(tapered, nt, opts.threads);

  ScalarField out(grid);
  const bool weighted = opts.weighting == ZeroFillWeighting::direction;
  const int nx = grid.shape[0], ny = grid.shape[1];
  parallel_for(0, ny, opts.threads, [&](int iy) {
    const double y = grid.coord(1, iy);
    for (int ix = 0; ix < nx; ++ix) {
      const double x = grid.coord(0, ix);
      if (sq(x - C[0]) + sq(y - C[1]) >= sq(R)) continue;
      double acc = 0;
      for (int i = 0; i < m; ++i) {
        const auto& p = geom.pos[i];
        const auto& nv = geom.normal[i];
        const double tx = x - p[0], ty = y - p[1];
        const double t = std::hypot(tx, ty);
        const double te = std::max(t, 0.25 * dr);
        double mult = 1.0;
        if (weighted) {
          const auto pw = zero_fill_pair_weights(geom, {x, y, 0}, i, opts.taper_frac);
          mult = 2.0 * pw[0];
        }
        acc += mult * geom.weight[i] * tab_interp(qd[i], t / dr) *
               (nv[0] * tx + nv[1] * ty) / te;
      }
      out.at(ix, iy) = acc / (2.0 * pi * pi);
    }
  });
  return out;
}

// --- algebraic -----------------------------------------------------------------------

ScalarField smt_adjoint(const SphericalSinogram& g, const GridSpec& grid, double quality,
                        int threads) {
  g.validate();
  grid.validate();
  require(g.geom.n == grid.n, "smt_adjoint: dimension mismatch");
  const SphericalSinogram gi = g.to_convention(RadialConvention::integral);
  const auto& geom = gi.geom;
  const int ndet = static_cast<int>(geom.size()), nr = gi.nr, n = grid.n;
  // replicate the forward transform's radial values bit for bit
  const double rmax_fwd = gi.dr * (nr - 1);
  const double dr = rmax_fwd / (nr - 1);
  const double h = grid.min_spacing();
  const double omega = unit_sphere_area(n);
  const double x0 = grid.origin[0], x1 = grid.coord(0, grid.shape[0] - 1);
  const double y0 = grid.origin[1], y1 = grid.coord(1, grid.shape[1] - 1);
  const double z0 = n == 3 ? grid.origin[2] : 0,
               z1 = n == 3 ? grid.coord(2, grid.shape[2] - 1) : 0;

  // one accumulator per worker, assigned by the same contiguous chunking
  // parallel_for uses, so no two threads share a slot
  const int nthreads =
      (threads <= 1 || ndet == 1) ? 1 : std::min(threads, ndet);
  std::vector<std::vector<double>> acc(nthreads,
                                       std::vector<double>(grid.size(), 0.0));
  std::vector<int> slot_of(ndet);
  for (int t = 0; t < nthreads; ++t) {
    const long lo = static_cast<long>(ndet) * t / nthreads;
    const long hi = static_cast<long>(ndet) * (t + 1) / nthreads;
    for (long i = lo; i < hi; ++i) slot_of[i] = t;
  }

  parallel_for(0, ndet, nthreads, [&](std::int64_t i) {
    std::vector<double>& A = acc[slot_of[i]];
    const auto& y = geom.pos[i];
    const double* row = gi.row(i);
    for (int j = 1; j < nr; ++j) {
      const double r = j * dr;
      if (row[j] == 0.0) continue;
      const int nodes = sphere_quadrature_nodes(n, r, h, quality);
      const double coeff = row[j] * omega * std::pow(r, n - 1) / nodes;
      for (int k = 0; k < nodes; ++k) {
        double px, py, pz = 0;
        if (n == 2) {
          const double th = 2.0 * pi / nodes * k;
          px = y[0] + r * std::cos(th);
          py = y[1] + r * std::sin(th);
          if (px < x0 || px > x1 || py < y0 || py > y1) continue;
        } else {
          const auto w = fib_dir(k, nodes);
          px = y[0] + r * w[0];
          py = y[1] + r * w[1];
          pz = y[2] + r * w[2];
          if (px < x0 || px > x1 || py < y0 || py > y1 || pz < z0 || pz > z1) continue;
        }
        // scatter with the interpolation weights of ScalarField::interp
        const double fx = (px - grid.origin[0]) / grid.spacing[0];
        const double fy = (py - grid.origin[1]) / grid.spacing[1];
        if (fx < 0 || fy < 0 || fx > grid.shape[0] - 1 || fy > grid.shape[1] - 1)
          continue;
        int ix = std::min(static_cast<int>(fx), grid.shape[0] - 2);
        int iy = std::min(static_cast<int>(fy), grid.shape[1] - 2);
        const double ax = fx - ix, ay = fy - iy;
        if (n == 2) {
          const std::size_t i00 = grid.index(ix, iy);
          A[i00] += coeff * (1 - ax) * (1 - ay);
          A[i00 + 1] += coeff * ax * (1 - ay);
          A[i00 + grid.shape[0]] += coeff * (1 - ax) * ay;
          A[i00 + grid.shape[0] + 1] += coeff * ax * ay;
        } else {
          const double fz = (pz - grid.origin[2]) / grid.spacing[2];
          if (fz < 0 || fz > grid.shape[2] - 1) continue;
          int iz = std::min(static_cast<int>(fz), grid.shape[2] - 2);
          const double az = fz - iz;
          const std::size_t sxy =
              static_cast<std::size_t>(grid.shape[0]) * grid.shape[1];
          const std::size_t i000 = grid.index(ix, iy, iz);
          for (int dz = 0; dz < 2; ++dz) {
            const double wz = dz ? az : 1 - az;
            const std::size_t base = i000 + dz * sxy;
            A[base] += coeff * (1 - ax) * (1 - ay) * wz;
            A[base + 1] += coeff * ax * (1 - ay) * wz;
            A[base + grid.shape[0]] += coeff * (1 - ax) * ay * wz;
            A[base + grid.shape[0] + 1] += coeff * ax * ay * wz;
          }
        }
      }
    }
  });

  ScalarField out(grid);
  for (const auto& A : acc)
    for (std::size_t k = 0; k < A.size(); ++k) out.v[k] += A[k];
  return out;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

ScalarField invert_algebraic(const SphericalSinogram& sino, const GridSpec& grid,
                             const AlgebraicOptions& opts) {
  sino.validate();
  grid.validate();
  require(opts.iterations >= 1, "invert_algebraic: need at least one iteration");
  const SphericalSinogram gi = sino.to_convention(RadialConvention::integral);
  const int nr = gi.nr;
  const double rmax = gi.dr * (nr - 1);
  if (opts.residual_log) opts.residual_log->clear();

  auto apply_m = [&](const ScalarField& f) {
    return spherical_mean_transform(f, gi.geom, nr, rmax, RadialConvention::integral,
                                    opts.quality, opts.threads);
  };
  auto apply_mt = [&](const SphericalSinogram& s) {
    return smt_adjoint(s, grid, opts.quality, opts.threads);
  };

  const double gnorm = l2_norm(gi.g);
  ScalarField x(grid);
  if (gnorm == 0) {
    if (opts.residual_log) opts.residual_log->assign(opts.iterations, 0.0);
    return x;
  }

  auto check_divergence = [&](double rn) {
    if (rn > 10.0 * gnorm)
      throw std::runtime_error(
          "invert_algebraic: residual diverged past 10x its starting value "
          "(see the residual log)");
  };

  if (opts.method == AlgebraicMethod::cg) {
    // CGLS on the normal equations
    SphericalSinogram r = gi;
    ScalarField s = apply_mt(r);
    ScalarField p = s;
    double gamma = dot(s.v, s.v);
    for (int it = 0; it < opts.iterations && gamma > 0; ++it) {
      const SphericalSinogram q = apply_m(p);
      const double qn = dot(q.g, q.g);
      if (qn == 0) break;
      const double alpha = gamma / qn;
      for (std::size_t k = 0; k < x.v.size(); ++k) x.v[k] += alpha * p.v[k];
      for (std::size_t k = 0; k < r.g.size(); ++k) r.g[k] -= alpha * q.g[k];
      const double rn = l2_norm(r.g);
      if (opts.residual_log) opts.residual_log->push_back(rn);
      check_divergence(rn);
      s = apply_mt(r);
      const double gamma2 = dot(s.v, s.v);
      const double beta = gamma2 / gamma;
      gamma = gamma2;
      for (std::size_t k = 0; k < p.v.size(); ++k) p.v[k] = s.v[k] + beta * p.v[k];
    }
    return x;
  }

  // Landweber: step 1/|M|^2 from a short power iteration on M^T M
  ScalarField v(grid, 1.0);
  double lam = 1.0;
  for (int it = 0; it < 20; ++it) {
    const double vn = v.l2();
    require(vn > 0, "invert_algebraic: power iteration collapsed");
    for (auto& w : v.v) w /= vn;
    v = apply_mt(apply_m(v));
    lam = v.l2();
  }
  require(lam > 0, "invert_algebraic: forward operator is zero on this grid");
  const double tau = 1.0 / lam;
  for (int it = 0; it < opts.iterations; ++it) {
    SphericalSinogram r = apply_m(x);
    for (std::size_t k = 0; k < r.g.size(); ++k) r.g[k] = gi.g[k] - r.g[k];
    const double rn = l2_norm(r.g);
    if (opts.residual_log) opts.residual_log->push_back(rn);
    check_divergence(rn);
    const ScalarField upd = apply_mt(r);
    for (std::size_t k = 0; k < x.v.size(); ++k) x.v[k] += tau * upd.v[k];
  }
  return x;
}

}  // namespace tatk
