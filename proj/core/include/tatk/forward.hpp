#pragma once
// Forward models: the spherical integral/mean transform, a free-space FDTD
// wave solver (plain leapfrog on an enlarged box so wall reflections cannot
// reach the detectors inside [0,T]), and the constant-speed conversions
// between spherical means and pressure traces.

#include <functional>

#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

// --- spherical integral transform ------------------------------------------

// g(y_i, r_j) on radii r_j = j*rmax/(nr-1). Quadrature: uniform angular
// trapezoid (2-D) / Fibonacci lattice (3-D), node count growing with r/h.
// `quality` scales the node count (1 = default density).
// `outside_nodes`, when given, receives the number of quadrature nodes that
// fell outside f's grid hull (those contribute 0).
SphericalSinogram spherical_mean_transform(const ScalarField& f,
                                           const AcquisitionGeometry& geom, int nr,
                                           double rmax,
                                           RadialConvention conv = RadialConvention::integral,
                                           double quality = 1.0, int threads = 1,
                                           long* outside_nodes = nullptr);

// Single-sphere mean of an analytic integrand with an explicit node count;
// the quadrature used above, exposed for oracle tests.
double sphere_mean_quadrature(const std::function<double(double, double, double)>& f,
                              int n, const std::array<double, 3>& center, double r,
                              int nodes);

// Node count the transform uses at radius r for grid spacing h.
int sphere_quadrature_nodes(int n, double r, double h, double quality);

// --- FDTD -------------------------------------------------------------------

struct FdtdOptions {
  double dt = 0;     // 0 => cfl * stability limit
  double cfl = 0.9;  // fraction of h/(c_max*sqrt(n))
  int threads = 1;
  double extra_margin = 0;  // widen the box beyond the reflection bound
};

SensorData fdtd_forward(const ScalarField& f, const SoundSpeedField& c,
                        const AcquisitionGeometry& geom, double T,
                        const FdtdOptions& opts = {});

// Same solver, streaming (u_prev, u_curr) to a callback after every step
// (including step 0). Used by the energy/decay analyses.
void fdtd_simulate(const ScalarField& f, const SoundSpeedField& c,
                   const AcquisitionGeometry& geom, double T, const FdtdOptions& opts,
                   const std::function<void(int step, double t, const ScalarField& prev,
                                            const ScalarField& curr, double dt)>& on_step);

// --- means <-> pressure (constant speed) ------------------------------------

// 3-D: p = d/dt [ t * (mean at r = c t) ]; 2-D: p = d/dt of the Abel-type
// integral of r*(mean)/sqrt(t^2-r^2) (singularity-split product integration,
// exact on linear-in-r integrands near the endpoint).
SensorData means_to_pressure(const SphericalSinogram& s, double speed = 1.0);

// Inverse of the above. 3-D: mean(t) = (1/t) * int_0^t p; 2-D: time-integrate
// p, then invert the Abel integral by product integration + differentiation.
SphericalSinogram pressure_to_means(const SensorData& d, double speed = 1.0);

// Shared 1-D helpers (uniform grids), exposed for tests.
void derivative_4th(const double* u, int n, double h, double* out);
// out[k] = int_0^{r_k} u(r) / sqrt(r_k^2 - r^2) dr, piecewise-linear u.
void abel_half_integral(const double* u, int n, double dr, double* out);

}  // namespace tatk
