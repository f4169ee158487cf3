#pragma once
// Geometric and data diagnostics: bicharacteristic ray tracing, visibility and
// trapping maps, wave-energy decay curves, and consistency (range) checks on
// measured data.

#include <array>
#include <vector>

#include "tatk/data.hpp"
#include "tatk/field.hpp"
#include "tatk/forward.hpp"
#include "tatk/series.hpp"

namespace tatk {

// --- rays ---------------------------------------------------------------------

struct RaySeed {
  std::array<double, 3> x{0, 0, 0};
  std::array<double, 3> xi{1, 0, 0};  // nonzero; |xi| is rescaled to 1/c(x)
};

struct Ray {
  RaySeed seed;
  std::vector<std::array<double, 3>> path;  // positions, kept on request
  bool escaped = false;
  double escape_time = -1;       // time the ray crossed the bounding sphere
  double hamiltonian_drift = 0;  // max relative |H - H0| / H0 along the trace
  bool valid = true;             // false when the drift exceeded 1e-4
};

struct RayBundle {
  std::vector<Ray> rays;
  double dt = 0;
  double t_max = 0;
};

// 4th-order integration of x' = c^2 xi, xi' = -grad(c^2) |xi|^2 / 2; a ray is
// escaped once it crosses the bounding sphere of S. dt = 0 picks a step from
// the speed grid / bounding radius.
RayBundle trace_rays(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                     const std::vector<RaySeed>& seeds, double t_max, double dt = 0,
                     bool keep_paths = false, int threads = 1);

// --- visibility ----------------------------------------------------------------

struct VisibilityMap {
  GridSpec grid;
  std::vector<double> fraction;  // per node, in [0,1]
  int directions = 0;
};

// Fraction of directions at each node from which a singularity would be
// detected: constant speed uses the line-vs-S intersection test, variable
// speed traces the two rays (+xi, -xi) and checks the crossing point.
VisibilityMap visibility_map(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                             const GridSpec& grid, int directions_per_node,
                             int threads = 1);

// --- escape / trapping -----------------------------------------------------------

struct EscapeReport {
  double max_escape_time = 0;     // over rays that escaped
  bool trapping_suspected = false;
  int total = 0, escaped = 0;
  double cap = 0;                 // time cap used
};

struct EscapeOptions {
  int radial_samples = 6;
  int directions = 16;
  double cap_factor = 10;  // cap = factor * (2 R / c_min)
  int threads = 1;
};

// Max escape time over a deterministic seed sample of the interior of S;
// trapping flag when any sampled ray stays inside past the cap.
EscapeReport escape_time(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                         const EscapeOptions& opts = {});

// --- range conditions -------------------------------------------------------------

struct RangeReport {
  std::vector<double> moment_residual;         // per order k = 0..k_max
  std::vector<double> orthogonality_residual;  // per eigen-index
  double wave_residual = -1;                   // < 0: not computed
  double moment_threshold = 1e-3;
  double orthogonality_threshold = 1e-3;
  double wave_threshold = 5e-2;
};

// Fits the k-th radial moment of the data, per detector, by a polynomial of
// total degree <= 2k in the detector coordinates; reports relative residuals.
RangeReport check_moment_condition(const SphericalSinogram& sino, int k_max,
                                   int threads = 1);

// Pairing of the data against Dirichlet disk modes with the radial Bessel
// weight; residuals normalized by the data and trace norms (2-D unit disk).
RangeReport check_orthogonality(const SphericalSinogram& sino, const EigenSystem& eig,
                                int threads = 1);

// Backward-cylinder consistency check for 3-D constant-speed data on a
// sphere: after rescaling to the unit ball and the time window [0,2], the
// time derivative of the reversed field at t = 0 must vanish.
RangeReport check_range_wave_odd(const SensorData& data, double speed,
                                 int grid_nodes = 65, int threads = 1);

// --- energy decay ------------------------------------------------------------------

struct DecayCurve {
  std::vector<double> t;
  std::vector<double> energy;  // wave energy restricted to the interior of S
};

DecayCurve energy_decay_curve(const ScalarField& f, const SoundSpeedField& c,
                              const AcquisitionGeometry& geom, double T,
                              int samples = 200, const FdtdOptions& opts = {});

}  // namespace tatk
