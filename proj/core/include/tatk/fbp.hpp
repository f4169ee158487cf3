#pragma once
// Closed-form filtered-backprojection inversions for circular (2-D) and
// spherical (3-D) acquisition, plus the Bessel-filtered formula that covers
// both dimensions, and a radial smoothing filter for noisy data.
//
// All formulas take the integral-convention sinogram (mean input is converted
// on entry). Reconstruction nodes outside the acquisition circle/sphere are
// set to 0: the formulas assume the source is supported inside, so the true
// value there is 0, and figure-replication grids are squares containing S.

#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

enum class Fbp2dFormula { kun2d, finch_log, finch_deriv };
enum class Fbp3dFormula { fpr_laplacian, fpr_dderiv, fpr_mixed, universal, nguyen };

struct FbpOptions {
  int threads = 1;
  // Reference vector for the nguyen formula, in absolute coordinates;
  // xi == sphere center reproduces the universal formula.
  std::array<double, 3> xi{0, 0, 0};
};

ScalarField invert_fbp_2d(const SphericalSinogram& sino, const GridSpec& grid,
                          Fbp2dFormula formula, const FbpOptions& opts = {});

ScalarField invert_fbp_3d(const SphericalSinogram& sino, const GridSpec& grid,
                          Fbp3dFormula formula, const FbpOptions& opts = {});

struct FbpNdOptions {
  int threads = 1;
  double lambda_max = 0;   // 0 => pi / dr (radial Nyquist)
  double lambda_step = 0;  // 0 => 4 nodes per fastest data oscillation
};

// Backprojection of the Bessel/Neumann-filtered data; valid for n = 2 and 3,
// where it agrees with kun2d / universal respectively.
ScalarField invert_fbp_nd(const SphericalSinogram& sino, const GridSpec& grid,
                          const FbpNdOptions& opts = {});

// Raised-cosine low-pass along the radius. cutoff is the stop edge as a
// fraction of Nyquist; the ramp spans [cutoff*(1-rolloff), cutoff]*Nyquist.
// cutoff = 1 with rolloff = 0 is the identity.
SphericalSinogram smooth_filter(const SphericalSinogram& s, double cutoff,
                                double rolloff = 0.5);

// Radial kernels of the n-dimensional filter: J(t) = J_{n/2-1}(t)/t^{n/2-1}
// and likewise with the Neumann function. Exposed for the kernel-symmetry
// property test.
double radial_kernel_j(int n, double t);
double radial_kernel_y(int n, double t);

// Filter stage of the kun2d formula: per-detector tables of d/dt q(y_i, t)
// on t_k = k*dr, k < nt, where q is the principal-value integral of
// g(y_i, r)/(r^2 - t^2). Exposed for the partial-data reconstructions, which
// backproject these tables with their own weights.
std::vector<std::vector<double>> kun2d_filter(const SphericalSinogram& sino, int nt,
                                              int threads = 1);

}  // namespace tatk
