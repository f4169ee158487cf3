// Domain types, phantoms, geometries, noise, conventions, file formats and
// the small numeric utilities everything else leans on.

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "common.hpp"
#include "tatk/data.hpp"
#include "tatk/fftu.hpp"
#include "tatk/field.hpp"
#include "tatk/geometry.hpp"
#include "tatk/io.hpp"
#include "tatk/phantom.hpp"
#include "tatk/util.hpp"

using namespace tatk;
namespace fs = std::filesystem;

namespace {
fs::path tmpdir() {
  const fs::path d = fs::temp_directory_path() / "tatk_test_core";
  fs::create_directories(d);
  return d;
}
}  // namespace

TEST_CASE("grid: box construction, indexing and coordinates") {
  const GridSpec g = GridSpec::box(2, 5, -1.0, 1.0);
  CHECK(g.shape[0] == 5);
  CHECK(g.shape[1] == 5);
  CHECK(g.shape[2] == 1);
  CHECK(g.coord(0, 0) == doctest::Approx(-1.0));
  CHECK(g.coord(0, 4) == doctest::Approx(1.0));
  CHECK(g.spacing[0] == doctest::Approx(0.5));
  CHECK(g.size() == 25);
  CHECK(g.min_spacing() == doctest::Approx(0.5));
}

TEST_CASE("phantom: empty spec gives the zero field") {
  PhantomSpec s;
  const ScalarField f = make_phantom(s, GridSpec::box(2, 17, -1, 1));
  for (double v : f.v) CHECK(v == 0.0);
  CHECK(support_radius(s) == 0.0);
}

TEST_CASE("phantom: unit disk indicator values") {
  PhantomSpec s;
  s.primitives.push_back({PrimitiveShape::ball, {0, 0, 0}, {1.0, 0, 0}, 0, 1.0});
  const GridSpec g = GridSpec::box(2, 101, -2.5, 2.5);
  const ScalarField f = make_phantom(s, g);
  CHECK(f.at(50, 50) == 1.0);                   // origin
  const int i2 = 90;                            // x = 2.0
  CHECK(g.coord(0, i2) == doctest::Approx(2.0));
  CHECK(f.at(i2, 50) == 0.0);
}

TEST_CASE("phantom: multi-disk scene layout on the unit square") {
  const PhantomSpec s = standard_scene(2);
  const GridSpec g = GridSpec::box(2, 129, -1, 1);
  const ScalarField f = make_phantom(s, g);
  // value at each primitive center = sum of amplitudes of containing disks
  for (const auto& p : s.primitives) {
    double expect = 0;
    for (const auto& q : s.primitives) {
      const double dx = p.center[0] - q.center[0], dy = p.center[1] - q.center[1];
      if (dx * dx + dy * dy <= q.semi_axes[0] * q.semi_axes[0]) expect += q.amplitude;
    }
    CHECK(s.value(p.center[0], p.center[1]) == doctest::Approx(expect));
  }
  // zero outside the unit disk
  CHECK(f.at(0, 0) == 0.0);
  CHECK(f.at(128, 128) == 0.0);
  // amplitudes visible as distinct levels
  std::set<double> levels(f.v.begin(), f.v.end());
  CHECK(levels.size() >= 5);
}

TEST_CASE("phantom: primitive outside the grid is rejected with bounds") {
  PhantomSpec s;
  s.primitives.push_back({PrimitiveShape::ball, {2.0, 0, 0}, {0.5, 0, 0}, 0, 1.0});
  CHECK_THROWS_WITH_AS(make_phantom(s, GridSpec::box(2, 33, -1, 1)),
                       doctest::Contains("grid covers"), std::invalid_argument);
}

TEST_CASE("phantom: grid refinement shrinks the L1 sampling gap like O(h)") {
  const PhantomSpec s = standard_scene(2);
  auto l1_gap = [&](int m) {
    // compare node values on the m-grid against the 2m-refined grid restricted
    // to the coarse nodes' midpoints: total variation of the indicator mix
    const GridSpec g = GridSpec::box(2, m, -1, 1);
    double acc = 0;
    const double h = g.spacing[0];
    for (int iy = 0; iy + 1 < m; ++iy)
      for (int ix = 0; ix + 1 < m; ++ix) {
        const double x = g.coord(0, ix) + 0.5 * h, y = g.coord(1, iy) + 0.5 * h;
        const double mid = s.value(x, y);
        acc += std::abs(mid - s.value(g.coord(0, ix), g.coord(1, iy))) * h * h;
      }
    return acc;
  };
  const double c1 = l1_gap(65), c2 = l1_gap(129);
  CHECK(c2 < c1);
  CHECK(c1 / c2 > 1.5);  // one halving of h should roughly halve the gap
}

TEST_CASE("phantom: support radius bound for the standard scene") {
  const double s = support_radius(standard_scene(2));
  CHECK(s == doctest::Approx(std::hypot(0.35, 0.45) + 0.12));
  const double sm = support_radius(standard_scene(2, 0.1));
  CHECK(sm == doctest::Approx(s + 0.05));
}

TEST_CASE("geometry: circle R=1.05 with 257 equispaced detectors") {
  GeometryParams p;
  p.kind = GeometryKind::circle;
  p.radius = 1.05;
  p.count = 257;
  const AcquisitionGeometry g = make_geometry(p);
  CHECK(g.closed());
  CHECK(g.size() == 257);
  for (const auto& y : g.pos)
    CHECK(std::hypot(y[0], y[1]) == doctest::Approx(1.05).epsilon(1e-12));
  // equal angular gaps
  const double a0 = std::atan2(g.pos[0][1], g.pos[0][0]);
  const double a1 = std::atan2(g.pos[1][1], g.pos[1][0]);
  CHECK(std::abs(a1 - a0) == doctest::Approx(2 * pi / 257).epsilon(1e-10));
  CHECK(g.total_weight() == doctest::Approx(2 * pi * 1.05).epsilon(1e-3));
  // outward normals
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::hypot(g.normal[i][0], g.normal[i][1]) == doctest::Approx(1.0));
    const double dp = g.normal[i][0] * g.pos[i][0] + g.normal[i][1] * g.pos[i][1];
    CHECK(dp > 0);
  }
}

TEST_CASE("geometry: arc of radius 1.3 left of x=1 is open") {
  GeometryParams p;
  p.kind = GeometryKind::arc;
  p.radius = 1.3;
  p.count = 200;
  p.theta0 = std::acos(1.0 / 1.3);
  p.theta1 = 2 * pi - std::acos(1.0 / 1.3);
  const AcquisitionGeometry g = make_geometry(p);
  CHECK_FALSE(g.closed());
  for (const auto& y : g.pos) CHECK(y[0] < 1.0 + 1e-12);
  CHECK(g.total_weight() < 2 * pi * 1.3);
}

TEST_CASE("geometry: two-detector sphere still carries the full area") {
  GeometryParams p;
  p.kind = GeometryKind::sphere;
  p.n = 3;
  p.radius = 1.0;
  p.count = 2;
  const AcquisitionGeometry g = make_geometry(p);
  CHECK(g.size() == 2);
  CHECK(g.total_weight() == doctest::Approx(4 * pi).epsilon(1e-6));
}

TEST_CASE("geometry: weights reproduce circumference and area to 0.1%") {
  GeometryParams c;
  c.kind = GeometryKind::circle;
  c.radius = 2.0;
  c.count = 64;
  CHECK(make_geometry(c).total_weight() ==
        doctest::Approx(2 * pi * 2.0).epsilon(1e-3));
  GeometryParams s;
  s.kind = GeometryKind::sphere;
  s.n = 3;
  s.radius = 1.5;
  s.count = 64;
  CHECK(make_geometry(s).total_weight() ==
        doctest::Approx(4 * pi * 1.5 * 1.5).epsilon(1e-3));
}

TEST_CASE("geometry: parameter validation") {
  GeometryParams p;
  p.count = 0;
  CHECK_THROWS_AS(make_geometry(p), std::invalid_argument);
  p.count = 16;
  p.radius = -1;
  CHECK_THROWS_AS(make_geometry(p), std::invalid_argument);
}

TEST_CASE("noise: exact level, determinism, and the zero-level identity") {
  GeometryParams p;
  p.count = 32;
  const AcquisitionGeometry geom = make_geometry(p);
  SphericalSinogram s(geom, 40, 0.05);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : s.g) v = u(rng);
  const std::vector<double> clean = s.g;

  SphericalSinogram a = s;
  CHECK(add_noise(a, 0.0, 17) == 0.0);
  CHECK(a.g == clean);

  SphericalSinogram b1 = s, b2 = s;
  const double ach1 = add_noise(b1, 0.15, 17);
  const double ach2 = add_noise(b2, 0.15, 17);
  CHECK(ach1 == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(b1.g == b2.g);  // same seed, bit-identical
  CHECK(tt::rel_l2(b1.g, clean) == doctest::Approx(0.15).epsilon(1e-12));

  SphericalSinogram b3 = s;
  add_noise(b3, 0.15, 18);
  CHECK(b3.g != b1.g);  // different seed, different draw

  // sensor-data overload follows the same contract
  SensorData d(geom, 50, 0.01);
  for (double& v : d.p) v = u(rng);
  const std::vector<double> cleanp = d.p;
  add_noise(d, 0.07, 5);
  CHECK(tt::rel_l2(d.p, cleanp) == doctest::Approx(0.07).epsilon(1e-12));
}

TEST_CASE("sinogram: convention round trip is exact away from r = 0") {
  GeometryParams p;
  p.count = 8;
  SphericalSinogram s(make_geometry(p), 24, 0.1);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (double& v : s.g) v = u(rng);
  for (std::size_t i = 0; i < s.geom.size(); ++i) s.row(i)[0] = 0.0;

  const SphericalSinogram m = s.to_convention(RadialConvention::mean);
  const SphericalSinogram back = m.to_convention(RadialConvention::integral);
  for (std::size_t i = 0; i < s.geom.size(); ++i) {
    CHECK(back.row(i)[0] == 0.0);
    for (int j = 1; j < s.nr; ++j)
      CHECK(back.row(i)[j] == doctest::Approx(s.row(i)[j]).epsilon(1e-14));
  }
  // factor spot check: integral = mean * r^{n-1} * (2 pi) at n = 2
  const double r3 = 3 * s.dr;
  CHECK(s.row(2)[3] == doctest::Approx(m.row(2)[3] * r3 * 2 * pi));
}

TEST_CASE("io: TATF1 round trips preserve payloads and geometry") {
  const fs::path dir = tmpdir();
  const GridSpec g = GridSpec::box(2, 9, -1, 1);
  const ScalarField f = tt::random_field(g, 42);
  const std::string fp = (dir / "f.tatf").string();
  write_field_tatf(fp, f);
  CHECK(tatf_kind(fp) == "field");
  const ScalarField f2 = read_field_tatf(fp);
  CHECK(f2.grid.shape == f.grid.shape);
  CHECK(f2.v == f.v);

  GeometryParams p;
  p.kind = GeometryKind::arc;
  p.count = 12;
  p.theta0 = 0.3;
  p.theta1 = 2.0;
  const AcquisitionGeometry geom = make_geometry(p);
  SphericalSinogram s(geom, 7, 0.25);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : s.g) v = u(rng);
  const std::string sp = (dir / "s.tatf").string();
  write_sinogram_tatf(sp, s);
  CHECK(tatf_kind(sp) == "sinogram");
  const SphericalSinogram s2 = read_sinogram_tatf(sp);
  CHECK(s2.g == s.g);
  CHECK(s2.nr == s.nr);
  CHECK(s2.dr == s.dr);
  CHECK(s2.geom.kind == geom.kind);
  CHECK(s2.geom.pos == geom.pos);
  CHECK(s2.geom.weight == geom.weight);
  CHECK(s2.geom.content_hash() == geom.content_hash());

  SensorData d(geom, 11, 0.02);
  for (double& v : d.p) v = u(rng);
  const std::string dp = (dir / "d.tatf").string();
  write_sensor_tatf(dp, d);
  CHECK(tatf_kind(dp) == "sensor");
  const SensorData d2 = read_sensor_tatf(dp);
  CHECK(d2.p == d.p);
  CHECK(d2.dt == d.dt);
}

TEST_CASE("io: PGM export writes P5 with a sidecar window") {
  const fs::path dir = tmpdir();
  const GridSpec g = GridSpec::box(2, 8, 0, 1);
  ScalarField f(g, 0.75);  // constant field
  const std::string path = (dir / "c.pgm").string();
  export_pgm(path, f);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  CHECK(magic == "P5");
  int w, h, maxv;
  in >> w >> h >> maxv;
  CHECK(w == 8);
  CHECK(h == 8);
  CHECK(maxv == 255);
  in.get();
  std::vector<unsigned char> px(64);
  in.read(reinterpret_cast<char*>(px.data()), 64);
  // constant field: every pixel identical
  for (auto v : px) CHECK(v == px[0]);
  CHECK(fs::exists(path + ".json"));

  // distinct amplitudes map to distinct gray levels
  const ScalarField ph = make_phantom(standard_scene(2), GridSpec::box(2, 65, -1, 1));
  const std::string p2 = (dir / "ph.pgm").string();
  export_pgm(p2, ph);
  std::ifstream in2(p2, std::ios::binary);
  std::string l;
  std::getline(in2, l);
  std::getline(in2, l);
  std::getline(in2, l);
  std::vector<unsigned char> q(65 * 65);
  in2.read(reinterpret_cast<char*>(q.data()), q.size());
  CHECK(std::set<unsigned char>(q.begin(), q.end()).size() >= 5);
}

TEST_CASE("fftu: Hilbert transform convention H(cos) = sin") {
  const int n = 1024;
  std::vector<double> c(n), out(n);
  const int k = 12;
  for (int j = 0; j < n; ++j) c[j] = std::cos(2 * pi * k * j / n);
  fftu::hilbert(c.data(), out.data(), n);
  for (int j = 0; j < n; j += 37)
    CHECK(out[j] == doctest::Approx(std::sin(2 * pi * k * j / n)).epsilon(1e-10));
}

TEST_CASE("fftu: lowpass preserves pass band and kills the stop band") {
  const int n = 256;
  std::vector<double> low(n), high(n);
  for (int j = 0; j < n; ++j) {
    low[j] = std::cos(2 * pi * 5 * j / n);
    high[j] = std::cos(2 * pi * 100 * j / n);
  }
  std::vector<double> l2 = low, h2 = high;
  fftu::lowpass(l2.data(), n, 0.5, 0.0);
  fftu::lowpass(h2.data(), n, 0.5, 0.0);
  CHECK(tt::rel_l2(l2, low) < 1e-12);
  double hnorm = 0;
  for (double v : h2) hnorm = std::max(hnorm, std::abs(v));
  CHECK(hnorm < 1e-10);
  CHECK(fftu::highband_energy_fraction(high.data(), n, 0.5) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fftu::highband_energy_fraction(low.data(), n, 0.5) ==
        doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("util: parallel_for covers each index exactly once") {
  for (int threads : {1, 3, 8}) {
    std::vector<int> hits(1000, 0);
    parallel_for(0, 1000, threads, [&](int i) { hits[i]++; });
    for (int h : hits) CHECK(h == 1);
  }
}

TEST_CASE("field: interpolation matches bilinear closed form") {
  const GridSpec g = GridSpec::box(2, 3, 0, 2);  // unit spacing
  ScalarField f(g);
  f.at(0, 0) = 1;
  f.at(1, 0) = 2;
  f.at(0, 1) = 3;
  f.at(1, 1) = 4;
  CHECK(f.interp(0.5, 0.5) == doctest::Approx(2.5));
  CHECK(f.interp(0.25, 0.0) == doctest::Approx(1.25));
  CHECK(f.interp(-0.1, 0.0) == 0.0);  // outside: default value
}
