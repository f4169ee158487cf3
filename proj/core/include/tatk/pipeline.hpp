#pragma once
// Experiment pipeline: a JSON run description is parsed into a RunConfig,
// then executed as phantom -> forward -> (noise) -> reconstruction(s) ->
// metrics. All intermediates are TATF1 files plus PGM images, metrics (error
// and wall-clock timing per method) a JSON report, and a manifest records the
// config hash, the seed and a content hash of every data/image output.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tatk/data.hpp"
#include "tatk/geometry.hpp"
#include "tatk/phantom.hpp"

namespace tatk {

struct MethodConfig {
  std::string name;  // kun2d, finch-log, finch-deriv, fpr-lap, fpr-dd,
                     // fpr-mixed, universal, nguyen, nd, norton, cube-series,
                     // eigen-var, time-reversal, planewave, zerofill, algebraic
  double smooth = 0;                  // radial low-pass cutoff fraction, 0 = off
  std::array<double, 3> xi{0, 0, 0};  // nguyen reference vector
  int modes = 128;                    // cube-series / eigen-var
  double T = 0;                       // time-reversal window, 0 = automatic
  std::string cutoff = "zero";        // time-reversal: zero | harmonic
  double reg = 0;                     // planewave: density penalty, 0 = auto
  double lambda_max = 0;              // planewave band edge, 0 = pi / dr
  int n_mag = 48, n_dir = 48;         // planewave frequency grid
  int omega_nodes = 33;               // planewave collocation nodes per axis
  std::string densities;              // planewave: explicit cache file path
  std::string weighting = "none";     // zerofill: none | direction
  double taper_frac = 0.05;           // zerofill edge taper
  int iterations = 20;                // algebraic
  std::string solver = "cg";          // algebraic: cg | landweber
  double quality = 1.0;               // algebraic forward quadrature density
};

struct RunConfig {
  int n = 2;
  int threads = 1;
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::string out_dir = "tatk_run";
  PhantomSpec phantom;      // default: the standard scene for dimension n
  GeometryParams geometry;  // default: circle, radius 1.05, 257 detectors
  std::string forward_model = "smt";  // smt | fdtd
  int radii = 129;                    // smt radial sample count
  double rmax = 0;     // 0 = farthest detector-to-grid-corner distance
  double speed = 1.0;  // constant sound speed
  double time_window = 0;  // fdtd recording window, 0 = rmax / speed
  double quality = 1.0;    // smt quadrature density
  double noise_level = 0;  // relative L2 noise added to the measured data
  int grid_nodes = 129;    // reconstruction grid, per axis
  double grid_half = 1.0;  // reconstruction box [-half, half]^n
  std::vector<MethodConfig> methods;  // default: [ kun2d ]

  void validate() const;
};

// Strict parsing: unknown keys and type mismatches are rejected with the
// dotted path of the offending field; missing fields take the defaults above.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& json_text);

// Canonical JSON image of a config (defaults applied, keys sorted); its hash
// is the manifest's config_hash.
std::string config_to_json_text(const RunConfig& cfg);

struct MethodMetrics {
  std::string name;        // unique per run (repeat methods get _2, _3, ...)
  double seconds = 0;      // wall-clock reconstruction time
  double rel_l2_error = 0; // relative L2 distance to the phantom on the grid
};

// Shared method dispatcher used by the pipeline and the CLI `reconstruct`
// verb. `sensor` may be null for methods that work on the sinogram alone.
// Eigensystem / density caches are read from and written to `cache_dir`
// (created on demand; empty = current directory); the relative names of
// cache files touched are appended to `cache_files` when given.
struct MethodContext {
  int threads = 1;
  double speed = 1.0;  // constant sound speed (time reversal, auto windows)
  std::string cache_dir;
  std::vector<std::string>* cache_files = nullptr;
};

ScalarField run_method(const MethodConfig& mc, const MethodContext& ctx,
                       const SphericalSinogram& sino, const SensorData* sensor,
                       const GridSpec& grid);

struct RunResult {
  std::string out_dir;
  std::vector<MethodMetrics> metrics;
  double noise_achieved = 0;  // measured relative L2 of the injected noise
  std::string manifest_path;
  std::string metrics_path;
};

// Executes the run under cfg.out_dir (created if needed). Stage failures are
// rethrown with the stage name attached; files already written are kept.
// The manifest covers every TATF1/PGM output; the metrics report holds the
// wall-clock timings and lives outside the manifest, so identical config +
// seed reruns produce byte-identical manifests and outputs.
RunResult run_pipeline(const RunConfig& cfg);

// Recomputes every hash in a manifest. Returns false and fills `err` (if
// given) on the first missing or altered file.
bool validate_manifest(const std::string& manifest_path, std::string* err = nullptr);

}  // namespace tatk
