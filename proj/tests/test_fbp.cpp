// Filtered-backprojection inversions: closed-form value checks against
// analytic sinograms, cross-agreement between the independent formulas, the
// Bessel-filtered route, the radial smoothing filter, and the structural
// invariants (linearity, rotation covariance, kernel symmetry, convergence).

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "common.hpp"
#include "tatk/fbp.hpp"
#include "tatk/forward.hpp"
#include "tatk/phantom.hpp"

using namespace tatk;

using tt::circle_geom;
using tt::disk_sinogram;
using tt::gauss_sinogram;
using tt::max_abs;
using tt::random_sinogram;
using tt::sphere_geom;

TEST_CASE("fbp: zero data reconstructs to zero everywhere") {
  const auto g2 = circle_geom(64, 1.05);
  const SphericalSinogram s2(g2, 64, 2.0 / 63);
  const GridSpec grid2 = GridSpec::box(2, 33, -1, 1);
  CHECK(max_abs(invert_fbp_2d(s2, grid2, Fbp2dFormula::kun2d).v) == 0.0);
  CHECK(max_abs(invert_fbp_2d(s2, grid2, Fbp2dFormula::finch_log).v) == 0.0);
  CHECK(max_abs(invert_fbp_2d(s2, grid2, Fbp2dFormula::finch_deriv).v) == 0.0);
  CHECK(max_abs(invert_fbp_nd(s2, grid2).v) == 0.0);

  const auto g3 = sphere_geom(64, 1.0);
  const SphericalSinogram s3(g3, 32, 2.0 / 31);
  const GridSpec grid3 = GridSpec::box(3, 17, -0.8, 0.8);
  for (auto f : {Fbp3dFormula::fpr_laplacian, Fbp3dFormula::fpr_dderiv,
                 Fbp3dFormula::fpr_mixed, Fbp3dFormula::universal, Fbp3dFormula::nguyen})
    CHECK(max_abs(invert_fbp_3d(s3, grid3, f).v) == 0.0);
}

TEST_CASE("fbp: centered disk recovers amplitude inside and zero outside") {
  const auto geom = circle_geom(257, 1.05);
  const SphericalSinogram sino = disk_sinogram(geom, 129, 1.6, 0, 0, 0.5, 1.0);
  const GridSpec grid = GridSpec::box(2, 129, -1, 1);
  const ScalarField f = invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d);

  CHECK(f.at(64, 64) == doctest::Approx(1.0).epsilon(0.05));
  double worst_out = 0;
  for (int iy = 0; iy < 129; ++iy)
    for (int ix = 0; ix < 129; ++ix) {
      const double x = grid.coord(0, ix), y = grid.coord(1, iy);
      if (std::hypot(x, y) > 0.7) worst_out = std::max(worst_out, std::abs(f.at(ix, iy)));
    }
  CHECK(worst_out <= 0.05);
}

TEST_CASE("fbp: the two-dimensional formulas agree on a smooth phantom") {
  PhantomSpec spec;
  spec.n = 2;
  spec.primitives.push_back({PrimitiveShape::ball, {0.1, -0.05, 0}, {0.45, 0, 0}, 0, 1.0});
  spec.mollify_width = 0.08;
  const GridSpec grid = GridSpec::box(2, 97, -1, 1);
  const ScalarField f = make_phantom(spec, grid);

  const auto geom = circle_geom(193, 1.05);
  const SphericalSinogram sino =
      spherical_mean_transform(f, geom, 129, 1.7, RadialConvention::integral, 1.0, 4);

  FbpOptions opts;
  opts.threads = 4;
  const ScalarField a = invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d, opts);
  const ScalarField b = invert_fbp_2d(sino, grid, Fbp2dFormula::finch_log, opts);
  const ScalarField c = invert_fbp_2d(sino, grid, Fbp2dFormula::finch_deriv, opts);
  CHECK(tt::rel_l2(b.v, a.v) <= 0.02);
  CHECK(tt::rel_l2(c.v, a.v) <= 0.02);
  CHECK(tt::rel_l2(c.v, b.v) <= 0.02);

  FbpNdOptions nd;
  nd.threads = 4;
  const ScalarField d = invert_fbp_nd(sino, grid, nd);
  CHECK(tt::rel_l2(d.v, a.v) <= 0.02);

  // and all of them recover the phantom itself
  CHECK(rel_l2_error(a, f) <= 0.05);
  CHECK(rel_l2_error(b, f) <= 0.05);
  CHECK(rel_l2_error(c, f) <= 0.05);
  CHECK(rel_l2_error(d, f) <= 0.05);
}

TEST_CASE("fbp: reference vector at the sphere center reproduces the plain formula") {
  const auto geom = sphere_geom(400, 1.0);
  const SphericalSinogram sino = gauss_sinogram(geom, 145, 1.8, 0.05);
  const GridSpec grid = GridSpec::box(3, 25, -0.8, 0.8);

  FbpOptions opts;
  opts.threads = 4;
  const ScalarField u = invert_fbp_3d(sino, grid, Fbp3dFormula::universal, opts);
  const ScalarField v = invert_fbp_3d(sino, grid, Fbp3dFormula::nguyen, opts);
  CHECK(tt::rel_l2(v.v, u.v) <= 1e-6);
}

TEST_CASE("fbp: the three-dimensional formulas recover a radial gaussian") {
  const auto geom = sphere_geom(1200, 1.0);
  const double s2 = 0.05;
  const SphericalSinogram sino = gauss_sinogram(geom, 181, 1.8, s2);
  const GridSpec grid = GridSpec::box(3, 64, -1, 1);
  const ScalarField ref = tt::sample_field(grid, [&](double x, double y, double z) {
    return std::exp(-(x * x + y * y + z * z) / s2);
  });

  FbpOptions opts;
  opts.threads = 4;
  const ScalarField u = invert_fbp_3d(sino, grid, Fbp3dFormula::universal, opts);
  CHECK(rel_l2_error(u, ref) <= 0.05);

  for (auto f : {Fbp3dFormula::fpr_laplacian, Fbp3dFormula::fpr_dderiv,
                 Fbp3dFormula::fpr_mixed}) {
    const ScalarField w = invert_fbp_3d(sino, grid, f, opts);
    CHECK(rel_l2_error(w, ref) <= 0.05);
    CHECK(tt::rel_l2(w.v, u.v) <= 0.05);
  }
}

TEST_CASE("fbp: bessel-filtered route matches the closed form in three dimensions") {
  const auto geom = sphere_geom(600, 1.0);
  const SphericalSinogram sino = gauss_sinogram(geom, 145, 1.8, 0.05);
  const GridSpec grid = GridSpec::box(3, 33, -0.8, 0.8);

  FbpOptions opts;
  opts.threads = 4;
  FbpNdOptions nd;
  nd.threads = 4;
  const ScalarField u = invert_fbp_3d(sino, grid, Fbp3dFormula::universal, opts);
  const ScalarField w = invert_fbp_nd(sino, grid, nd);
  CHECK(tt::rel_l2(w.v, u.v) <= 0.01);
}

TEST_CASE("fbp: bessel-filtered route rejects an unresolvable lambda grid") {
  const auto geom = circle_geom(16, 1.0);
  const SphericalSinogram sino = random_sinogram(geom, 32, 0.05, 7);
  const GridSpec grid = GridSpec::box(2, 17, -0.5, 0.5);

  FbpNdOptions coarse;
  coarse.lambda_step = 5.0;
  CHECK_THROWS_WITH_AS(invert_fbp_nd(sino, grid, coarse),
                       doctest::Contains("lambda grid too coarse"),
                       std::invalid_argument);

  FbpNdOptions wide;
  wide.lambda_max = 10.0 * pi / sino.dr;
  CHECK_THROWS_WITH_AS(invert_fbp_nd(sino, grid, wide),
                       doctest::Contains("lambda_max beyond"), std::invalid_argument);
}

TEST_CASE("fbp: smoothing filter is the identity at full band") {
  const auto geom = circle_geom(8, 1.0);
  const SphericalSinogram s = random_sinogram(geom, 64, 0.03, 11);
  const SphericalSinogram t = smooth_filter(s, 1.0, 0.0);
  CHECK(t.g == s.g);
}

TEST_CASE("fbp: smoothing filter removes the stop band and keeps the pass band") {
  const auto geom = circle_geom(8, 1.0);
  const int nr = 64;
  SphericalSinogram hi(geom, nr, 0.03), lo(geom, nr, 0.03);
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const int k_hi = 20 + static_cast<int>(i);  // bins above the cutoff edge (16)
    for (int j = 0; j < nr; ++j) {
      hi.at(i, j) = std::cos(2.0 * pi * k_hi * j / nr);
      lo.at(i, j) = std::cos(2.0 * pi * 3 * j / nr);  // below the ramp start (8)
    }
  }
  const SphericalSinogram hi_f = smooth_filter(hi, 0.5, 0.5);
  const SphericalSinogram lo_f = smooth_filter(lo, 0.5, 0.5);

  double hi_in = 0, hi_out = 0, lo_diff = 0;
  for (std::size_t k = 0; k < hi.g.size(); ++k) {
    hi_in += sq(hi.g[k]);
    hi_out += sq(hi_f.g[k]);
    lo_diff = std::max(lo_diff, std::abs(lo_f.g[k] - lo.g[k]));
  }
  CHECK(std::sqrt(hi_out) <= 1e-3 * std::sqrt(hi_in));
  CHECK(lo_diff <= 1e-12);
}

TEST_CASE("fbp: smoothing noisy data lowers the reconstruction error") {
  const auto geom = circle_geom(257, 1.05);
  const SphericalSinogram clean = disk_sinogram(geom, 129, 1.6, 0, 0, 0.5, 1.0);
  const GridSpec grid = GridSpec::box(2, 129, -1, 1);
  const ScalarField ref = tt::sample_field(grid, [](double x, double y, double) {
    return std::hypot(x, y) <= 0.5 ? 1.0 : 0.0;
  });

  SphericalSinogram noisy = clean;
  add_noise(noisy, 0.15, 20260819);
  FbpOptions opts;
  opts.threads = 4;
  const double err_noisy =
      rel_l2_error(invert_fbp_2d(noisy, grid, Fbp2dFormula::kun2d, opts), ref);
  const double err_smoothed = rel_l2_error(
      invert_fbp_2d(smooth_filter(noisy, 0.5), grid, Fbp2dFormula::kun2d, opts), ref);
  CHECK(err_smoothed < err_noisy);
}

TEST_CASE("fbp: filter kernel is symmetric in the two interior points") {
  // W(x,y) = int_S J(lam|x-z|) Y(lam|y-z|) dA(z) must equal W(y,x) for x, y
  // inside S; the quadratures here are independent of the library's geometry.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.55, 0.55);

  const double R2 = 1.05;  // 2-D circle
  const int M = 2048;
  for (double lam : {3.7, 12.9, 27.3}) {
    const double xa = u(rng), ya = u(rng), xb = u(rng), yb = u(rng);
    auto W2 = [&](double px, double py, double qx, double qy) {
      double s = 0;
      for (int k = 0; k < M; ++k) {
        const double th = 2.0 * pi * k / M;
        const double zx = R2 * std::cos(th), zy = R2 * std::sin(th);
        s += radial_kernel_j(2, lam * std::hypot(px - zx, py - zy)) *
             radial_kernel_y(2, lam * std::hypot(qx - zx, qy - zy));
      }
      return s * (2.0 * pi * R2 / M);
    };
    auto S2 = [&](double px, double py, double qx, double qy) {
      double s = 0;
      for (int k = 0; k < M; ++k) {
        const double th = 2.0 * pi * k / M;
        const double zx = R2 * std::cos(th), zy = R2 * std::sin(th);
        s += std::abs(radial_kernel_j(2, lam * std::hypot(px - zx, py - zy)) *
                      radial_kernel_y(2, lam * std::hypot(qx - zx, qy - zy)));
      }
      return s * (2.0 * pi * R2 / M);
    };
    const double w1 = W2(xa, ya, xb, yb), w2 = W2(xb, yb, xa, ya);
    CHECK(std::abs(w1 - w2) <= 1e-8 * S2(xa, ya, xb, yb));
  }

  const double R3 = 1.0;  // 3-D sphere
  for (double lam : {4.3, 15.1}) {
    const std::array<double, 3> a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
    auto W3 = [&](const std::array<double, 3>& p, const std::array<double, 3>& q,
                  bool mag) {
      auto f = [&](double zx, double zy, double zz) {
        const double tp = lam * std::sqrt(sq(p[0] - zx) + sq(p[1] - zy) + sq(p[2] - zz));
        const double tq = lam * std::sqrt(sq(q[0] - zx) + sq(q[1] - zy) + sq(q[2] - zz));
        const double v = radial_kernel_j(3, tp) * radial_kernel_y(3, tq);
        return mag ? std::abs(v) : v;
      };
      return tt::sphere_integral_oracle(f, {0, 0, 0}, R3, 48);
    };
    CHECK(std::abs(W3(a, b, false) - W3(b, a, false)) <= 1e-8 * W3(a, b, true));
  }
}

TEST_CASE("fbp: reconstruction is linear in the data") {
  const auto geom = circle_geom(33, 1.05);
  const SphericalSinogram s1 = random_sinogram(geom, 64, 0.03, 101);
  const SphericalSinogram s2 = random_sinogram(geom, 64, 0.03, 202);
  SphericalSinogram mix = s1;
  for (std::size_t k = 0; k < mix.g.size(); ++k)
    mix.g[k] = 1.7 * s1.g[k] - 0.6 * s2.g[k];
  const GridSpec grid = GridSpec::box(2, 25, -1, 1);

  for (auto f : {Fbp2dFormula::kun2d, Fbp2dFormula::finch_log, Fbp2dFormula::finch_deriv}) {
    const ScalarField fa = invert_fbp_2d(s1, grid, f);
    const ScalarField fb = invert_fbp_2d(s2, grid, f);
    const ScalarField fm = invert_fbp_2d(mix, grid, f);
    std::vector<double> lin(fa.v.size());
    for (std::size_t k = 0; k < lin.size(); ++k) lin[k] = 1.7 * fa.v[k] - 0.6 * fb.v[k];
    CHECK(tt::rel_l2(fm.v, lin) <= 1e-12);
  }

  const auto g3 = sphere_geom(80, 1.0);
  const SphericalSinogram t1 = random_sinogram(g3, 48, 0.04, 303);
  const SphericalSinogram t2 = random_sinogram(g3, 48, 0.04, 404);
  SphericalSinogram tmix = t1;
  for (std::size_t k = 0; k < tmix.g.size(); ++k)
    tmix.g[k] = 1.7 * t1.g[k] - 0.6 * t2.g[k];
  const GridSpec grid3 = GridSpec::box(3, 13, -0.7, 0.7);
  const ScalarField ua = invert_fbp_3d(t1, grid3, Fbp3dFormula::universal);
  const ScalarField ub = invert_fbp_3d(t2, grid3, Fbp3dFormula::universal);
  const ScalarField um = invert_fbp_3d(tmix, grid3, Fbp3dFormula::universal);
  std::vector<double> lin3(ua.v.size());
  for (std::size_t k = 0; k < lin3.size(); ++k) lin3[k] = 1.7 * ua.v[k] - 0.6 * ub.v[k];
  CHECK(tt::rel_l2(um.v, lin3) <= 1e-12);
}

TEST_CASE("fbp: reconstruction commutes with a quarter turn of the scene") {
  PhantomSpec spec;
  spec.n = 2;
  spec.primitives.push_back({PrimitiveShape::ball, {0.3, 0.1, 0}, {0.3, 0, 0}, 0, 1.0});
  spec.mollify_width = 0.06;
  const GridSpec grid = GridSpec::box(2, 97, -1, 1);
  const ScalarField f = make_phantom(spec, grid);

  const int nd = 256;
  const auto geom = circle_geom(nd, 1.05);
  const SphericalSinogram sino =
      spherical_mean_transform(f, geom, 129, 1.7, RadialConvention::integral, 1.0, 4);

  // Rotating the scene by +90 degrees permutes detector rows by a quarter of
  // the ring (the detector set is invariant, count % 4 == 0).
  SphericalSinogram rot = sino;
  for (int i = 0; i < nd; ++i) {
    const int src = (i + 3 * nd / 4) % nd;
    std::copy(sino.row(src), sino.row(src) + sino.nr, rot.row(i));
  }

  FbpOptions opts;
  opts.threads = 4;
  const ScalarField a = invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d, opts);
  const ScalarField b = invert_fbp_2d(rot, grid, Fbp2dFormula::kun2d, opts);

  // On a symmetric grid the quarter turn maps nodes to nodes:
  // b(x, y) should equal a(y, -x).
  ScalarField expect(grid);
  const int m = grid.shape[0];
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) expect.at(ix, iy) = a.at(iy, m - 1 - ix);
  CHECK(tt::rel_l2(b.v, expect.v) <= 1e-3);
}

TEST_CASE("fbp: doubling the data sampling at least halves the error") {
  const double s2 = 0.08;
  const GridSpec grid = GridSpec::box(2, 97, -1, 1);
  const ScalarField ref = tt::sample_field(
      grid, [&](double x, double y, double) { return std::exp(-(x * x + y * y) / s2); });

  auto err_at = [&](int ndet, int nr) {
    const auto geom = circle_geom(ndet, 1.05);
    const SphericalSinogram sino = gauss_sinogram(geom, nr, 2.08, s2);
    FbpOptions opts;
    opts.threads = 4;
    return rel_l2_error(invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d, opts), ref);
  };
  const double coarse = err_at(64, 65);
  const double fine = err_at(128, 129);
  CHECK(fine <= 0.6 * coarse);
}
