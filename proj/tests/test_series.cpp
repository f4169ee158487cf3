// Series-expansion reconstructions: analytic and numeric Dirichlet
// eigensystems, circular-harmonic (Norton-type) inversion, the cube
// eigenfunction method, and the variable-speed eigenfunction method, checked
// against closed-form eigenvalues, independent quadrature oracles, and the
// forward solvers.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>

#include "common.hpp"
#include "tatk/fbp.hpp"
#include "tatk/forward.hpp"
#include "tatk/phantom.hpp"
#include "tatk/series.hpp"

using namespace tatk;
namespace fs = std::filesystem;

namespace {

// bisection root of J0 on [2, 3], independent of the library's zero finder
double j0_first_zero_bisect() {
  double a = 2.0, b = 3.0;
  for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
    const double m = 0.5 * (a + b);
    if (std::cyl_bessel_j(0.0, a) * std::cyl_bessel_j(0.0, m) <= 0)
      b = m;
    else
      a = m;
  }
  return 0.5 * (a + b);
}

SoundSpeedField bump_speed(const GridSpec& g, double amp, double s2) {
  SoundSpeedField c;
  c.background = 1.0;
  c.field = tt::sample_field(g, [&](double x, double y, double z) {
    return 1.0 + amp * std::exp(-(x * x + y * y + z * z) / s2);
  });
  return c;
}

double grid_dot(const GridSpec& g, const std::vector<double>& a,
                const std::vector<double>& b) {
  double vol = 1;
  for (int ax = 0; ax < g.n; ++ax) vol *= g.spacing[ax];
  return tt::dot(a, b) * vol;
}

// zero-extend the radial axis of a mean-convention sinogram and convert to
// pressure traces (valid because the means vanish beyond the support reach)
SensorData traces_from_sinogram(const SphericalSinogram& sino, double T) {
  SphericalSinogram means = sino.to_convention(RadialConvention::mean);
  const int need = static_cast<int>(std::ceil(T / means.dr)) + 1;
  if (need > means.nr) {
    SphericalSinogram ext(means.geom, need, means.dr, RadialConvention::mean);
    for (std::size_t i = 0; i < means.geom.size(); ++i)
      std::copy(means.row(i), means.row(i) + means.nr, ext.row(i));
    means = std::move(ext);
  }
  return means_to_pressure(means, 1.0);
}

SensorData truncate_traces(const SensorData& d, double T) {
  const int nt = std::min(d.nt, static_cast<int>(std::ceil(T / d.dt)) + 1);
  SensorData out(d.geom, nt, d.dt);
  for (std::size_t i = 0; i < d.geom.size(); ++i)
    std::copy(d.row(i), d.row(i) + nt, out.row(i));
  return out;
}

}  // namespace

TEST_CASE("series: square fundamental mode has eigenvalue 2 pi^2") {
  const EigenRegion region = EigenRegion::cube(2, 0.0, 1.0, 33);
  const EigenSystem eig = eigensystem_dirichlet(region, nullptr, 8);
  CHECK(eig.lambda[0] * eig.lambda[0] ==
        doctest::Approx(2.0 * pi * pi).epsilon(1e-12));
  CHECK(eig.cube_index[0][0] == 1);
  CHECK(eig.cube_index[0][1] == 1);

  // discrete norms and orthogonality are exact for sine products
  const ScalarField u0 = eig.mode_field(0), u1 = eig.mode_field(1);
  CHECK(grid_dot(region.grid, u0.v, u0.v) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(grid_dot(region.grid, u0.v, u1.v)) <= 1e-10);
}

TEST_CASE("series: first disk eigenvalue matches a bisection zero of J0") {
  const double z = j0_first_zero_bisect();
  CHECK(z == doctest::Approx(2.404825557).epsilon(1e-8));

  const EigenRegion region = EigenRegion::disk(1.0, 33);
  const EigenSystem eig = eigensystem_dirichlet(region, nullptr, 8);
  CHECK(eig.lambda[0] == doctest::Approx(z).epsilon(1e-10));
  CHECK(eig.disk_modes[0].k == 0);
  CHECK(eig.disk_modes[0].s == 1);
}

TEST_CASE("series: disk modes are unit-norm against an independent quadrature") {
  const double R = 1.0;
  const EigenRegion region = EigenRegion::disk(R, 65);
  const EigenSystem eig = eigensystem_dirichlet(region, nullptr, 12);

  std::vector<double> gx, gw;
  tt::gauss_nodes(400, gx, gw);
  const GridSpec& g = region.grid;
  const int mid = g.shape[1] / 2;  // nodes along the positive x-axis
  for (std::size_t m = 0; m < eig.size(); ++m) {
    const auto& dm = eig.disk_modes[m];
    if (dm.parity != 0) continue;  // sin(k theta) modes vanish on the axis
    const ScalarField u = eig.mode_field(m);
    // recover the normalization constant from one on-axis node, then check
    // the continuum norm with Gauss-Legendre in rho
    const int ix = g.shape[0] / 2 + g.shape[0] / 5;
    const double x = g.coord(0, ix);
    const double N = u.at(ix, mid) / std::cyl_bessel_j(dm.k, dm.lam * x);
    double s = 0;
    for (int q = 0; q < 400; ++q) {
      const double rho = 0.5 * R * (gx[q] + 1.0);
      const double j = N * std::cyl_bessel_j(dm.k, dm.lam * rho);
      s += gw[q] * 0.5 * R * j * j * rho;
    }
    s *= dm.k == 0 ? 2.0 * pi : pi;
    CHECK(std::abs(s - 1.0) <= 1e-8);
  }
}

TEST_CASE("series: numeric eigenpairs satisfy the weighted helmholtz equation") {
  const GridSpec g = GridSpec::box(2, 25, -1, 1);
  const EigenRegion region = EigenRegion::from_grid(g);
  const SoundSpeedField c = bump_speed(g, 0.25, 0.3);
  const EigenSystem eig = eigensystem_dirichlet(region, &c, 24);

  const double h2 = sq(g.spacing[0]);
  double vol = g.spacing[0] * g.spacing[1];
  for (std::size_t m = 0; m < eig.size(); ++m) {
    const auto& u = eig.modes[m];
    const double lam2 = sq(eig.lambda[m]);
    double r2 = 0;
    for (int iy = 1; iy < g.shape[1] - 1; ++iy)
      for (int ix = 1; ix < g.shape[0] - 1; ++ix) {
        const double cc = c.value(g.coord(0, ix), g.coord(1, iy));
        const double lap = (u[g.index(ix + 1, iy)] + u[g.index(ix - 1, iy)] +
                            u[g.index(ix, iy + 1)] + u[g.index(ix, iy - 1)] -
                            4.0 * u[g.index(ix, iy)]) /
                           h2;
        r2 += sq(cc * cc * lap + lam2 * u[g.index(ix, iy)]);
      }
    CHECK(std::sqrt(r2 * vol) / lam2 <= 1e-6);
  }

  // orthonormality in the c^-2 inner product
  auto wdot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (int iy = 0; iy < g.shape[1]; ++iy)
      for (int ix = 0; ix < g.shape[0]; ++ix) {
        const double cc = c.value(g.coord(0, ix), g.coord(1, iy));
        s += a[g.index(ix, iy)] * b[g.index(ix, iy)] / (cc * cc);
      }
    return s * vol;
  };
  CHECK(std::abs(wdot(eig.modes[0], eig.modes[0]) - 1.0) <= 1e-8);
  CHECK(std::abs(wdot(eig.modes[10], eig.modes[10]) - 1.0) <= 1e-8);
  CHECK(std::abs(wdot(eig.modes[0], eig.modes[1])) <= 1e-8);
  CHECK(std::abs(wdot(eig.modes[3], eig.modes[17])) <= 1e-8);
}

TEST_CASE("series: mode counts beyond the grid limits are rejected") {
  const EigenRegion region = EigenRegion::cube(2, 0.0, 1.0, 17);
  CHECK_THROWS_WITH_AS(eigensystem_dirichlet(region, nullptr, 225),
                       doctest::Contains("Nyquist"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(eigensystem_dirichlet(region, nullptr, 300),
                       doctest::Contains("mode count exceeds"), std::invalid_argument);
}

TEST_CASE("series: eigensystem cache files round-trip exactly") {
  const fs::path dir = fs::temp_directory_path();

  const EigenSystem cube =
      eigensystem_dirichlet(EigenRegion::cube(2, -1, 1, 17), nullptr, 6);
  const fs::path p1 = dir / "tatk_test_eigsys_cube.tatf";
  write_eigensystem_tatf(p1.string(), cube);
  const EigenSystem cube2 = read_eigensystem_tatf(p1.string());
  CHECK(cube2.kind == EigenModeKind::cube_analytic);
  CHECK(cube2.weighted == false);
  CHECK(cube2.lambda == cube.lambda);
  CHECK(cube2.cube_index == cube.cube_index);
  CHECK(cube2.region.grid == cube.region.grid);

  const EigenSystem disk =
      eigensystem_dirichlet(EigenRegion::disk(1.0, 17), nullptr, 5);
  const fs::path p2 = dir / "tatk_test_eigsys_disk.tatf";
  write_eigensystem_tatf(p2.string(), disk);
  const EigenSystem disk2 = read_eigensystem_tatf(p2.string());
  CHECK(disk2.kind == EigenModeKind::disk_analytic);
  CHECK(disk2.lambda == disk.lambda);
  REQUIRE(disk2.disk_modes.size() == disk.disk_modes.size());
  for (std::size_t m = 0; m < disk.disk_modes.size(); ++m) {
    CHECK(disk2.disk_modes[m].k == disk.disk_modes[m].k);
    CHECK(disk2.disk_modes[m].s == disk.disk_modes[m].s);
    CHECK(disk2.disk_modes[m].parity == disk.disk_modes[m].parity);
    CHECK(disk2.disk_modes[m].lam == disk.disk_modes[m].lam);
  }

  const GridSpec g = GridSpec::box(2, 17, -1, 1);
  const SoundSpeedField c = bump_speed(g, 0.2, 0.3);
  const EigenSystem num =
      eigensystem_dirichlet(EigenRegion::from_grid(g), &c, 6);
  const fs::path p3 = dir / "tatk_test_eigsys_num.tatf";
  write_eigensystem_tatf(p3.string(), num);
  const EigenSystem num2 = read_eigensystem_tatf(p3.string());
  CHECK(num2.kind == EigenModeKind::grid_numeric);
  CHECK(num2.weighted == true);
  CHECK(num2.lambda == num.lambda);
  CHECK(num2.modes == num.modes);
  CHECK(num2.speed.field.v == num.speed.field.v);
  CHECK(num2.speed.background == num.speed.background);

  fs::remove(p1);
  fs::remove(p2);
  fs::remove(p3);
}

TEST_CASE("series: circular-harmonic inversion of zero data is zero") {
  const auto geom = tt::circle_geom(64, 1.05);
  const SphericalSinogram zero(geom, 64, 0.03);
  const ScalarField f = invert_norton_2d(zero, GridSpec::box(2, 33, -1, 1));
  CHECK(tt::max_abs(f.v) == 0.0);

  GeometryParams a;
  a.kind = GeometryKind::arc;
  a.n = 2;
  a.radius = 1.05;
  a.count = 32;
  a.theta0 = 0;
  a.theta1 = pi;
  const SphericalSinogram open_data(make_geometry(a), 64, 0.03);
  CHECK_THROWS_WITH_AS(invert_norton_2d(open_data, GridSpec::box(2, 33, -1, 1)),
                       doctest::Contains("full-circle"), std::invalid_argument);
}

TEST_CASE("series: radial scenes concentrate all energy in the zeroth harmonic") {
  const auto geom = tt::circle_geom(129, 1.05);
  const SphericalSinogram sino = tt::disk_sinogram(geom, 129, 1.6, 0, 0, 0.5, 1.0);
  const GridSpec grid = GridSpec::box(2, 65, -1, 1);
  std::vector<double> energy;
  NortonOptions opts;
  opts.threads = 4;
  opts.harmonic_energy = &energy;
  const ScalarField f = invert_norton_2d(sino, grid, opts);

  const double total = std::accumulate(energy.begin(), energy.end(), 0.0);
  const double rest = total - energy[0];
  CHECK(rest <= 1e-6 * total);
  CHECK(f.at(32, 32) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("series: circular-harmonic inversion agrees with backprojection") {
  const GridSpec grid = GridSpec::box(2, 129, -1, 1);
  const ScalarField f = make_phantom(standard_scene(2), grid);
  const auto geom = tt::circle_geom(257, 1.05);
  const SphericalSinogram sino =
      spherical_mean_transform(f, geom, 129, 1.74, RadialConvention::integral, 1.0, 4);

  NortonOptions nopt;
  nopt.threads = 4;
  FbpOptions fopt;
  fopt.threads = 4;
  const ScalarField a = invert_norton_2d(sino, grid, nopt);
  const ScalarField b = invert_fbp_2d(sino, grid, Fbp2dFormula::kun2d, fopt);
  CHECK(tt::rel_l2(a.v, b.v) <= 0.03);
}

TEST_CASE("series: cube method maps zero data to zero") {
  const auto geom = tt::square_sides_geom(-1, 1, 32);
  const SphericalSinogram zero(geom, 64, 0.05);
  const EigenSystem eig =
      eigensystem_dirichlet(EigenRegion::cube(2, -1, 1, 33), nullptr, 16);
  const std::vector<double> alpha = cube_series_coefficients(zero, eig);
  CHECK(tt::max_abs(alpha) == 0.0);
  CHECK(tt::max_abs(invert_cube_series(zero, eig).v) == 0.0);
}

TEST_CASE("series: cube coefficients pick out a single eigenfunction") {
  const EigenRegion region = EigenRegion::cube(2, -1, 1, 65);
  const EigenSystem eig = eigensystem_dirichlet(region, nullptr, 40);
  const ScalarField f5 = eig.mode_field(5);

  const auto geom = tt::square_sides_geom(-1, 1, 48);
  const SphericalSinogram sino =
      spherical_mean_transform(f5, geom, 257, 2.9, RadialConvention::integral, 1.0, 4);
  const std::vector<double> alpha = cube_series_coefficients(sino, eig, {4});

  CHECK(std::abs(alpha[5] - 1.0) <= 1e-2);
  double rest = 0;
  for (std::size_t m = 0; m < alpha.size(); ++m)
    if (m != 5) rest += sq(alpha[m]);
  CHECK(rest <= 1e-3);
}

TEST_CASE("series: cube method converges on a smooth phantom") {
  const EigenRegion region = EigenRegion::cube(2, -1, 1, 65);
  PhantomSpec spec;
  spec.n = 2;
  spec.primitives.push_back({PrimitiveShape::ball, {0.1, -0.2, 0}, {0.35, 0, 0}, 0, 1.0});
  spec.mollify_width = 0.1;
  const ScalarField f = make_phantom(spec, region.grid);

  const auto geom = tt::square_sides_geom(-1, 1, 48);
  const SphericalSinogram sino =
      spherical_mean_transform(f, geom, 257, 2.9, RadialConvention::integral, 1.0, 4);

  // truncation: error decreases (within jitter) as the mode count doubles
  double prev = -1;
  double err256 = 0;
  for (int M : {32, 64, 128, 256}) {
    const EigenSystem eig = eigensystem_dirichlet(region, nullptr, M);
    const double err = rel_l2_error(invert_cube_series(sino, eig, {4}), f);
    if (prev >= 0) CHECK(err <= prev * 1.05);
    prev = err;
    err256 = err;
  }
  CHECK(err256 <= 0.10);

  // Parseval: the coefficient energy approaches ||f||^2 as M grows
  const double nf2 = sq(f.l2());
  const EigenSystem e64 = eigensystem_dirichlet(region, nullptr, 64);
  const EigenSystem e256 = eigensystem_dirichlet(region, nullptr, 256);
  auto energy = [&](const EigenSystem& e) {
    const std::vector<double> a = cube_series_coefficients(sino, e, {4});
    double s = 0;
    for (double x : a) s += x * x;
    return s;
  };
  const double p64 = energy(e64), p256 = energy(e256);
  CHECK(std::abs(p256 - nf2) <= std::abs(p64 - nf2) + 0.01 * nf2);
  CHECK(std::abs(p256 - nf2) <= 0.05 * nf2);
}

TEST_CASE("series: sources outside the cube barely disturb the interior") {
  const EigenRegion region = EigenRegion::cube(2, -1, 1, 65);
  const EigenSystem eig = eigensystem_dirichlet(region, nullptr, 256);
  const auto geom = tt::square_sides_geom(-1, 1, 48);

  PhantomSpec inside;
  inside.n = 2;
  inside.primitives.push_back({PrimitiveShape::ball, {0.1, -0.2, 0}, {0.35, 0, 0}, 0, 1.0});
  inside.mollify_width = 0.1;
  PhantomSpec both = inside;
  both.primitives.push_back({PrimitiveShape::ball, {1.7, 0.5, 0}, {0.3, 0, 0}, 0, 0.8});

  const GridSpec big = GridSpec::box(2, 161, -2.5, 2.5);
  const ScalarField fin = make_phantom(inside, big);
  const ScalarField fboth = make_phantom(both, big);
  const ScalarField ref = make_phantom(inside, region.grid);

  const int nr = 309;
  const double rmax = 3.5;
  const SphericalSinogram s_in =
      spherical_mean_transform(fin, geom, nr, rmax, RadialConvention::integral, 1.0, 4);
  const SphericalSinogram s_both =
      spherical_mean_transform(fboth, geom, nr, rmax, RadialConvention::integral, 1.0, 4);

  const double err_in = rel_l2_error(invert_cube_series(s_in, eig, {4}), ref);
  const double err_both = rel_l2_error(invert_cube_series(s_both, eig, {4}), ref);
  CHECK(err_in <= 0.10);
  CHECK(err_both <= 2.0 * err_in);
}

TEST_CASE("series: variable-speed method maps zero data to zero") {
  const auto geom = tt::square_sides_geom(-1, 1, 16);
  const SensorData zero(geom, 64, 0.05);
  const SoundSpeedField c1 = SoundSpeedField::constant(1.0);
  const EigenSystem eig =
      eigensystem_dirichlet(EigenRegion::cube(2, -1, 1, 33), &c1, 16);
  CHECK(tt::max_abs(invert_eigen_variable(zero, eig).v) == 0.0);

  const EigenSystem plain =
      eigensystem_dirichlet(EigenRegion::cube(2, -1, 1, 33), nullptr, 16);
  CHECK_THROWS_WITH_AS(invert_eigen_variable(zero, plain),
                       doctest::Contains("weighted"), std::invalid_argument);
}

TEST_CASE("series: time-domain route matches the cube method at constant speed") {
  const EigenRegion region = EigenRegion::cube(2, -1, 1, 65);
  PhantomSpec spec;
  spec.n = 2;
  spec.primitives.push_back({PrimitiveShape::ball, {0.1, -0.2, 0}, {0.35, 0, 0}, 0, 1.0});
  spec.mollify_width = 0.1;
  const ScalarField f = make_phantom(spec, region.grid);

  const auto geom = tt::square_sides_geom(-1, 1, 48);
  const SphericalSinogram sino =
      spherical_mean_transform(f, geom, 257, 2.9, RadialConvention::integral, 1.0, 4);
  const SensorData traces = traces_from_sinogram(sino, 12.0);

  const EigenSystem plain = eigensystem_dirichlet(region, nullptr, 256);
  const SoundSpeedField c1 = SoundSpeedField::constant(1.0);
  const EigenSystem weighted = eigensystem_dirichlet(region, &c1, 256);

  const ScalarField cs = invert_cube_series(sino, plain, {4});
  EigenVarOptions evo;
  evo.threads = 4;
  std::string warn;
  evo.warning = &warn;
  const ScalarField ev = invert_eigen_variable(traces, weighted, evo);
  CHECK(warn.empty());
  CHECK(tt::rel_l2(ev.v, cs.v) <= 0.03);
  CHECK(rel_l2_error(ev, f) <= 0.10);

  // doubling the record length does not hurt
  const ScalarField ev_half =
      invert_eigen_variable(truncate_traces(traces, 6.0), weighted, evo);
  CHECK(rel_l2_error(ev, f) <= rel_l2_error(ev_half, f));

  // a clearly short window draws the warning
  invert_eigen_variable(truncate_traces(traces, 2.5), weighted, evo);
  CHECK(warn.find("too short") != std::string::npos);
}

TEST_CASE("series: variable-speed method reconstructs through a speed bump") {
  // +20% radial speed bump (non-trapping), time-domain data from the wave
  // solver, reconstruction error measured on a fine grid
  const SoundSpeedField c = bump_speed(GridSpec::box(2, 129, -2, 2), 0.2, 0.25);

  PhantomSpec spec;
  spec.n = 2;
  spec.primitives.push_back({PrimitiveShape::ball, {0.15, -0.1, 0}, {0.38, 0, 0}, 0, 1.0});
  spec.mollify_width = 0.16;
  const GridSpec fgrid = GridSpec::box(2, 97, -1, 1);
  const ScalarField f = make_phantom(spec, fgrid);

  const auto geom = tt::square_sides_geom(-1, 1, 64);
  const double T = 4.0 * 2.0 * std::sqrt(2.0);  // 4 crossings of the diameter
  FdtdOptions fo;
  fo.threads = 4;
  const SensorData data = fdtd_forward(f, c, geom, T, fo);

  const EigenRegion region = EigenRegion::cube(2, -1, 1, 49);
  const EigenSystem eig = eigensystem_dirichlet(region, &c, 320, 4);
  EigenVarOptions evo;
  evo.threads = 4;
  std::string warn;
  evo.warning = &warn;
  const ScalarField rec = invert_eigen_variable(data, eig, evo);

  const GridSpec fine = GridSpec::box(2, 129, -1, 1);
  ScalarField up(fine);
  for (int iy = 0; iy < 129; ++iy)
    for (int ix = 0; ix < 129; ++ix)
      up.at(ix, iy) = rec.interp(fine.coord(0, ix), fine.coord(1, iy));
  const ScalarField ref = make_phantom(spec, fine);
  CHECK(rel_l2_error(up, ref) <= 0.10);
}
