#pragma once
// Time reversal: solve the wave equation backward from measured boundary data
// down to t = 0. Works for any sound speed the forward solver accepts and any
// closed acquisition surface (circle, sphere, cube faces).

#include <array>
#include <string>

#include "tatk/analysis.hpp"
#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

enum class CutoffMode {
  zero,      // start from q(T) = 0, q_t(T) = 0
  harmonic,  // start from the harmonic extension of the t = T boundary trace
};

struct TimeReversalOptions {
  CutoffMode cutoff = CutoffMode::zero;
  double cfl = 0.9;       // fraction of the stability limit when dt = 0
  double dt = 0;          // 0: derived from the grid; else must satisfy the limit
  bool want_qt0 = false;  // also return the time derivative at t = 0
  int threads = 1;
};

struct TimeReversalResult {
  ScalarField q0;   // reconstructed initial pressure on the requested grid
  ScalarField qt0;  // d/dt at t = 0 (empty grid unless requested)
};

// Backward solve of p_tt = c^2 Lap p on the interior of the closed surface,
// clamping the nodes on and outside the surface to the (interpolated) data.
// Nodes of `grid` outside the surface come back as 0.
TimeReversalResult time_reverse_full(const SensorData& data, const SoundSpeedField& c,
                                     const GridSpec& grid,
                                     const TimeReversalOptions& opts = {});

ScalarField time_reverse(const SensorData& data, const SoundSpeedField& c,
                         const GridSpec& grid, const TimeReversalOptions& opts = {});

struct CutoffChoice {
  double T = 0;                    // recommended measurement / reversal time
  bool trapping_suspected = false;
  EscapeReport rays;               // the underlying escape-time sample
};

struct CutoffTimeOptions {
  double safety = 2.0;  // T = safety * max escape time
  EscapeOptions escape;
};

// Picks a reversal time from sampled ray escape times out of the interior of
// the acquisition surface.
CutoffChoice choose_cutoff_time(const SoundSpeedField& c, const AcquisitionGeometry& geom,
                                const CutoffTimeOptions& opts = {});

}  // namespace tatk
