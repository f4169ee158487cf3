#pragma once
// Reconstruction from open (non-closed) acquisition curves: the plane-wave
// density method, a weighted zero-fill baseline on top of the filtered
// backprojection formulas, and algebraic (iterative least-squares) inversion.

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

// --- plane-wave densities -----------------------------------------------------

// Polar frequency grid: magnitudes x directions. Directions cover the upper
// half-plane (theta_d = pi d / directions); the lower half follows from
// conjugate symmetry of the transform of a real field.
struct XiGrid {
  std::vector<double> magnitudes;  // ascending, all > 0
  int directions = 0;

  // magnitudes (q+1) * lambda_max / n_mag, q = 0..n_mag-1
  static XiGrid uniform(double lambda_max, int n_mag, int n_dir);
  void validate() const;
};

struct PlaneWaveDensities {
  AcquisitionGeometry geom;
  GridSpec omega;       // collocation region (a grid whose box is Omega)
  XiGrid xi;
  double reg = 0;       // density-norm penalty actually used
  double norm_cap = 0;  // guaranteed bound on every density norm
  std::string warning;  // nonempty when part of Omega is invisible from S

  // per (magnitude q, direction d), flattened q * directions + d:
  std::vector<std::vector<std::complex<double>>> rho_j;  // per detector
  std::vector<std::vector<std::complex<double>>> rho_y;
  std::vector<double> residual;  // relative L2 fit error over Omega

  void validate() const;
};

struct DensityOptions {
  double reg = 0;  // 0: 1e-6 * largest normal-equation diagonal
  int threads = 1;
  bool check_visibility = true;
};

// For each xi, fits the sum of two single-layer potentials (kernels
// J0(lambda r), Y0(lambda r)) on the detectors to the plane wave
// exp(-i xi . x) over a collocation grid on Omega, with a quadratic penalty
// on the density norms. 2-D open geometries only.
PlaneWaveDensities precompute_densities(const AcquisitionGeometry& geom,
                                        const GridSpec& omega, const XiGrid& xi,
                                        const DensityOptions& opts = {});

// Disk cache: one file holds the full density set.
void write_densities_tatf(const std::string& path, const PlaneWaveDensities& d);
PlaneWaveDensities read_densities_tatf(const std::string& path);
// Stable key (hex) over geometry + xi-grid + reg, for cache file names.
std::string densities_cache_key(const AcquisitionGeometry& geom, const XiGrid& xi,
                                double reg);

struct PlaneWaveInvertOptions {
  int threads = 1;
};

// Radial data moments against J0/Y0 per detector combine with the densities
// into samples of the Fourier transform on the polar grid; the transform is
// then inverted by polar quadrature (uniform in angle, trapezoid + quadratic
// small-frequency head in the magnitude).
ScalarField invert_planewave(const SphericalSinogram& sino, const PlaneWaveDensities& dens,
                             const GridSpec& grid,
                             const PlaneWaveInvertOptions& opts = {});

// --- zero-fill baseline ---------------------------------------------------------

enum class ZeroFillWeighting { none, direction };

struct ZeroFillOptions {
  ZeroFillWeighting weighting = ZeroFillWeighting::none;
  double taper_frac = 0.05;  // raised-cosine taper, fraction of the arc length
  int threads = 1;
};

// Missing detectors contribute zero; data edges get a smooth taper; with
// direction weighting each detector contribution is scaled so the pair of
// tangent circles through a point shares unit total weight per direction.
ScalarField invert_zero_fill(const SphericalSinogram& sino, const GridSpec& grid,
                             const ZeroFillOptions& opts = {});

// Normalized weights of the two tangent circles through x touching the
// acquisition circle at detector `det` and at the antipodal point of the
// chord; they sum to 1 wherever either side is covered. Exposed for tests.
std::array<double, 2> zero_fill_pair_weights(const AcquisitionGeometry& geom,
                                             const std::array<double, 3>& x, int det,
                                             double taper_frac = 0.05);

// Tapered coverage indicator of the arc at angle theta, in [0,1].
double arc_coverage(const AcquisitionGeometry& geom, double theta,
                    double taper_frac = 0.05);

// --- algebraic -------------------------------------------------------------------

enum class AlgebraicMethod { cg, landweber };

struct AlgebraicOptions {
  int iterations = 50;
  AlgebraicMethod method = AlgebraicMethod::cg;
  double quality = 1.0;  // forward quadrature density, as in the transform
  int threads = 1;
  std::vector<double>* residual_log = nullptr;  // per-iteration |Mf - g|
};

// Iterative least-squares solution of (spherical mean transform) f = g with
// the exact discrete adjoint of the implemented quadrature. Throws on
// divergence (residual above 10x its starting value); a provided residual
// log is filled up to the point of failure.
ScalarField invert_algebraic(const SphericalSinogram& sino, const GridSpec& grid,
                             const AlgebraicOptions& opts = {});

// The discrete adjoint of spherical_mean_transform (integral convention) for
// the plain unweighted inner products on grid nodes and samples.
ScalarField smt_adjoint(const SphericalSinogram& g, const GridSpec& grid,
                        double quality = 1.0, int threads = 1);

}  // namespace tatk
