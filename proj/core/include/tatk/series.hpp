#pragma once
// Series-expansion reconstructions: circular-harmonic inversion in 2-D, the
// Dirichlet-eigenfunction method on a cube/square, and its variable-speed
// generalization driven by time-domain boundary data.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

enum class EigenRegionKind { cube, ball, grid };
enum class EigenModeKind { cube_analytic, disk_analytic, grid_numeric };

// The region an eigensystem lives on, together with the uniform grid used to
// sample/synthesize its modes. For cube regions the grid must cover exactly
// [lo, hi]^n (boundary nodes included); for ball regions it covers the
// bounding square; for grid regions the grid box *is* the region.
struct EigenRegion {
  EigenRegionKind kind = EigenRegionKind::cube;
  int n = 2;
  std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};  // cube / grid box
  double radius = 1.0;                             // ball
  std::array<double, 3> center{0, 0, 0};           // ball
  GridSpec grid;

  static EigenRegion cube(int n, double lo, double hi, int nodes_per_axis);
  static EigenRegion disk(double radius, int nodes_per_axis);
  static EigenRegion from_grid(const GridSpec& g);
  void validate() const;
};

// Dirichlet eigenpairs of -Delta (plain L2) or -c^2 Delta (inner product
// weighted by c^-2). lambda stores the square roots of the eigenvalues,
// ascending; modes are unit-norm in the declared inner product.
struct EigenSystem {
  EigenRegion region;
  EigenModeKind kind = EigenModeKind::cube_analytic;
  bool weighted = false;   // true: L2(Omega; c^-2) with the stored speed
  SoundSpeedField speed;   // meaningful when weighted
  std::vector<double> lambda;

  std::vector<std::array<int, 3>> cube_index;  // cube_analytic mode triples
  struct DiskMode {
    int k = 0;       // angular order
    int s = 1;       // radial zero index (1-based)
    int parity = 0;  // 0: cos(k theta), 1: sin(k theta)
    double lam = 0;  // j_{k,s} / R
  };
  std::vector<DiskMode> disk_modes;            // disk_analytic
  std::vector<std::vector<double>> modes;      // grid_numeric, full-grid nodes

  std::size_t size() const { return lambda.size(); }
  // u_m sampled on region.grid (zero outside the region for ball modes).
  ScalarField mode_field(std::size_t m) const;
  // Outward normal derivative of u_m at a boundary point y.
  double normal_derivative(std::size_t m, const std::array<double, 3>& y) const;
  void validate() const;
};

// count = number of modes, taken ascending in lambda. c == nullptr gives the
// plain Laplacian; a non-null c produces a weighted system (constant c keeps
// the analytic cube path, variable c requires a grid region and uses the
// discretized symmetric form). Rejects counts whose lambda exceed the grid
// Nyquist limit pi/h.
EigenSystem eigensystem_dirichlet(const EigenRegion& region, const SoundSpeedField* c,
                                  int count, int threads = 1);

void write_eigensystem_tatf(const std::string& path, const EigenSystem& e);
EigenSystem read_eigensystem_tatf(const std::string& path);

// --- circular-harmonic inversion (2-D, closed circle) -----------------------

struct NortonOptions {
  int threads = 1;
  double lambda_max = 0;   // 0 => pi / dr
  double lambda_step = 0;  // 0 => pi / (2 (rmax + R))
  int max_harmonic = -1;   // -1 => ndet/2 - 1
  // optional: per-harmonic reconstruction energies (index = |k|, symmetrized)
  std::vector<double>* harmonic_energy = nullptr;
};

// Angular Fourier decomposition of the data, per-harmonic Hankel-type
// inversion with the non-vanishing combined Bessel denominator, polar
// synthesis, bilinear resampling to `grid`.
ScalarField invert_norton_2d(const SphericalSinogram& sino, const GridSpec& grid,
                             const NortonOptions& opts = {});

// --- cube eigenfunction method ----------------------------------------------

struct SeriesOptions { int threads = 1; };

// Coefficients alpha_m of f in the eigenbasis, recovered from the spherical
// integrals via the free-space radial kernel; order matches eig.lambda.
std::vector<double> cube_series_coefficients(const SphericalSinogram& sino,
                                             const EigenSystem& eig,
                                             const SeriesOptions& opts = {});

ScalarField invert_cube_series(const SphericalSinogram& sino, const EigenSystem& eig,
                               const SeriesOptions& opts = {});

// --- variable-speed eigenfunction method ------------------------------------

struct EigenVarOptions {
  int threads = 1;
  // warn when the RMS of the data over the trailing 10% of [0,T] exceeds this
  // fraction of the overall RMS (time window likely too short)
  double tail_energy_threshold = 0.05;
  std::string* warning = nullptr;  // receives the warning text, if any
};

// Per-mode time projections f_m = -(1/lambda_m) int_0^T sin(lambda_m t)
// g_m(t) dt with g_m the detector-quadrature pairing of the data against the
// outward normal trace of mode m; no differentiation of the data.
ScalarField invert_eigen_variable(const SensorData& data, const EigenSystem& eig,
                                  const EigenVarOptions& opts = {});

}  // namespace tatk
