// Command-line front end. Verbs:
//   phantom     render the configured phantom to TATF1 + PGM
//   simulate    phantom + forward model (+ noise), writing the data files
//   reconstruct run one reconstruction method on an existing data file
//   analyze     ray / visibility / escape / energy-decay reports
//   rangecheck  data-consistency residuals of a sinogram / sensor file
//   run         the full pipeline described by a JSON config
// Exit codes: 0 success, 2 invalid input or config, 3 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tatk/analysis.hpp"
#include "tatk/data.hpp"
#include "tatk/forward.hpp"
#include "tatk/io.hpp"
#include "tatk/partial_data.hpp"
#include "tatk/pipeline.hpp"
#include "tatk/series.hpp"
#include "tatk/time_reversal.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tatk;

namespace {

struct GlobalFlags {
  std::string out_dir;
  long long seed = -1;
  int threads = 0;
  bool deterministic = false;
};

void apply_overrides(RunConfig& cfg, const GlobalFlags& g) {
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed);
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.deterministic) cfg.deterministic = true;
}

void write_report(const std::string& out_dir, const std::string& name,
                  const json& j) {
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    out << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
}

// Loads either data kind and supplies the other via the constant-speed
// conversions when a method needs it.
struct LoadedData {
  SphericalSinogram sino;
  SensorData sensor;
  bool have_sino = false, have_sensor = false;
};

LoadedData load_data(const std::string& path, double speed) {
  LoadedData d;
  const std::string kind = tatf_kind(path);
  if (kind == "sinogram") {
    d.sino = read_sinogram_tatf(path);
    d.have_sino = true;
  } else if (kind == "sensor") {
    d.sensor = read_sensor_tatf(path);
    d.have_sensor = true;
  } else {
    throw std::invalid_argument(path + ": expected a sinogram or sensor file, got \"" +
                                kind + "\"");
  }
  (void)speed;
  return d;
}

SoundSpeedField load_speed(const std::string& field_path, double constant,
                           double background) {
  if (field_path.empty()) return SoundSpeedField::constant(constant);
  SoundSpeedField c;
  c.field = read_field_tatf(field_path);
  c.background = background;
  // support radius: largest ball around the grid center inside the hull
  const GridSpec& g = c.field.grid;
  double lo = 1e300;
  for (int a = 0; a < g.n; ++a) {
    const double half = 0.5 * (g.coord(a, g.shape[a] - 1) - g.origin[a]);
    lo = std::min(lo, half);
    c.support_center[a] = g.origin[a] + half;
  }
  c.support_radius = lo;
  c.validate();
  return c;
}

int run_action(const std::function<void()>& act) {
  try {
    act();
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermoacoustic/photoacoustic reconstruction toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GlobalFlags g;
  std::string config_path;
  std::function<void()> action;

  // --- run / phantom / simulate (config-driven) -----------------------------
  auto add_config_verbs = [&](CLI::App* sub, const std::string& mode) {
    sub->add_option("--config", config_path, "pipeline JSON config")->required();
    sub->add_option("--out-dir", g.out_dir, "override config out_dir");
    sub->add_option("--seed", g.seed, "override config seed");
    sub->add_option("--threads", g.threads, "override config threads");
    sub->add_flag("--deterministic", g.deterministic, "force deterministic mode");
    sub->callback([&, mode] {
      action = [&, mode] {
        RunConfig cfg = parse_config(config_path);
        apply_overrides(cfg, g);
        if (mode == "run") {
          const RunResult r = run_pipeline(cfg);
          json out{{"out_dir", r.out_dir},
                   {"manifest", r.manifest_path},
                   {"metrics", r.metrics_path}};
          json arr = json::array();
          for (const auto& m : r.metrics)
            arr.push_back(json{{"name", m.name},
                               {"rel_l2_error", m.rel_l2_error},
                               {"seconds", m.seconds}});
          out["methods"] = arr;
          std::cout << out.dump(2) << "\n";
          return;
        }
        fs::create_directories(cfg.out_dir);
        const GridSpec grid =
            GridSpec::box(cfg.n, cfg.grid_nodes, -cfg.grid_half, cfg.grid_half);
        const ScalarField f = make_phantom(cfg.phantom, grid);
        write_field_tatf((fs::path(cfg.out_dir) / "phantom.tatf").string(), f);
        export_pgm((fs::path(cfg.out_dir) / "phantom.pgm").string(), f);
        if (mode == "phantom") {
          std::cout << json{{"out_dir", cfg.out_dir},
                            {"files", {"phantom.tatf", "phantom.pgm"}}}
                           .dump(2)
                    << "\n";
          return;
        }
        // simulate: forward (+ noise)
        const AcquisitionGeometry geom = make_geometry(cfg.geometry);
        const double rmax = [&] {
          if (cfg.rmax > 0) return cfg.rmax;
          const double s = support_radius(cfg.phantom);
          if (s <= 0) return geom.max_distance_to(grid);
          double m = 0;
          for (const auto& p : geom.pos)
            m = std::max(m, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]));
          return m + s;
        }();
        json files = json::array();
        files.push_back("phantom.tatf");
        files.push_back("phantom.pgm");
        SphericalSinogram sino;
        SensorData sensor;
        if (cfg.forward_model == "smt") {
          sino = spherical_mean_transform(f, geom, cfg.radii, rmax,
                                          RadialConvention::integral, cfg.quality,
                                          cfg.threads);
          if (cfg.noise_level > 0) add_noise(sino, cfg.noise_level, cfg.seed);
          write_sinogram_tatf((fs::path(cfg.out_dir) / "sinogram.tatf").string(),
                              sino);
          files.push_back("sinogram.tatf");
        } else {
          const double T =
              cfg.time_window > 0 ? cfg.time_window : rmax / cfg.speed;
          FdtdOptions o;
          o.threads = cfg.threads;
          sensor = fdtd_forward(f, SoundSpeedField::constant(cfg.speed), geom, T, o);
          if (cfg.noise_level > 0) add_noise(sensor, cfg.noise_level, cfg.seed);
          write_sensor_tatf((fs::path(cfg.out_dir) / "sensor.tatf").string(), sensor);
          files.push_back("sensor.tatf");
        }
        std::cout << json{{"out_dir", cfg.out_dir}, {"files", files}}.dump(2) << "\n";
      };
    });
  };
  add_config_verbs(app.add_subcommand("run", "execute the full pipeline"), "run");
  add_config_verbs(app.add_subcommand("phantom", "write the configured phantom"),
                   "phantom");
  add_config_verbs(app.add_subcommand("simulate", "phantom + forward model (+ noise)"),
                   "simulate");

  // --- reconstruct -----------------------------------------------------------
  {
    auto* sub = app.add_subcommand("reconstruct", "run one method on a data file");
    static std::string data_path, phantom_path, method, Tspec = "auto";
    static MethodConfig mc;
    static double speed = 1.0;
    static int grid_nodes = 129;
    static double grid_half = 1.0;
    static std::string cache_dir;
    sub->add_option("--data", data_path, "sinogram/sensor TATF1 file")->required();
    sub->add_option("--method", method,
                    "kun2d|finch-log|finch-deriv|fpr-lap|fpr-dd|fpr-mixed|"
                    "universal|nguyen|nd|norton|cube-series|eigen-var|"
                    "time-reversal|planewave|zerofill|algebraic")
        ->required();
    sub->add_option("--phantom", phantom_path, "reference field for the error metric");
    sub->add_option("--grid-nodes", grid_nodes, "reconstruction nodes per axis");
    sub->add_option("--grid-half", grid_half, "reconstruction box half extent");
    sub->add_option("--speed", speed, "constant sound speed");
    sub->add_option("--smooth", mc.smooth, "radial low-pass cutoff fraction");
    sub->add_option("--xi", mc.xi, "reference vector (nguyen)")->expected(3);
    sub->add_option("--modes", mc.modes, "eigenmode count");
    sub->add_option("--T", Tspec, "time-reversal window: auto or seconds");
    sub->add_option("--cutoff", mc.cutoff, "time-reversal cutoff: zero|harmonic");
    sub->add_option("--reg", mc.reg, "plane-wave density penalty");
    sub->add_option("--lambda-max", mc.lambda_max, "plane-wave band edge");
    sub->add_option("--n-mag", mc.n_mag, "plane-wave magnitude count");
    sub->add_option("--n-dir", mc.n_dir, "plane-wave direction count");
    sub->add_option("--omega-nodes", mc.omega_nodes, "collocation nodes per axis");
    sub->add_option("--densities", cache_dir, "cache directory for densities/eigensystems");
    sub->add_option("--weighting", mc.weighting, "zero-fill weighting: none|direction");
    sub->add_option("--taper-frac", mc.taper_frac, "zero-fill edge taper fraction");
    sub->add_option("--iters", mc.iterations, "algebraic iteration count");
    sub->add_option("--solver", mc.solver, "algebraic solver: cg|landweber");
    sub->add_option("--quality", mc.quality, "forward quadrature density");
    sub->add_option("--out-dir", g.out_dir, "output directory");
    sub->add_option("--threads", g.threads, "worker threads");
    sub->callback([&] {
      action = [&] {
        mc.name = method;
        mc.T = Tspec == "auto" ? 0.0 : std::stod(Tspec);
        const std::string out_dir = g.out_dir.empty() ? "." : g.out_dir;
        fs::create_directories(out_dir);
        LoadedData d = load_data(data_path, speed);
        const bool needs_sensor =
            method == "time-reversal" || method == "eigen-var";
        if (needs_sensor && !d.have_sensor) {
          d.sensor = means_to_pressure(d.sino.to_convention(RadialConvention::mean),
                                       speed);
          d.have_sensor = true;
        }
        if (!d.have_sino) {
          if (!needs_sensor)
            d.sino = pressure_to_means(d.sensor, speed)
                         .to_convention(RadialConvention::integral);
          else  // placeholder; sensor-only methods ignore it
            d.sino = SphericalSinogram(d.sensor.geom, 2, 1.0);
          d.have_sino = true;
        }
        MethodContext ctx;
        ctx.threads = g.threads > 0 ? g.threads : 1;
        ctx.speed = speed;
        ctx.cache_dir = cache_dir.empty() ? out_dir : cache_dir;
        const GridSpec grid = GridSpec::box(d.sino.geom.n, grid_nodes, -grid_half,
                                            grid_half);
        const auto t0 = std::chrono::steady_clock::now();
        const ScalarField rec =
            run_method(mc, ctx, d.sino, d.have_sensor ? &d.sensor : nullptr, grid);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        const std::string base = "recon_" + method;
        write_field_tatf((fs::path(out_dir) / (base + ".tatf")).string(), rec);
        export_pgm((fs::path(out_dir) / (base + ".pgm")).string(), rec);
        json rep{{"method", method},
                 {"seconds", secs},
                 {"out_dir", out_dir},
                 {"files", {base + ".tatf", base + ".pgm"}}};
        if (!phantom_path.empty()) {
          const ScalarField ref0 = read_field_tatf(phantom_path);
          ScalarField ref(rec.grid);
          for (int iz = 0; iz < rec.grid.shape[2]; ++iz)
            for (int iy = 0; iy < rec.grid.shape[1]; ++iy)
              for (int ix = 0; ix < rec.grid.shape[0]; ++ix)
                ref.at(ix, iy, iz) =
                    ref0.interp(rec.grid.coord(0, ix), rec.grid.coord(1, iy),
                                rec.grid.n == 3 ? rec.grid.coord(2, iz) : 0.0);
          rep["rel_l2_error"] = rel_l2_error(rec, ref);
        }
        write_report(out_dir, "reconstruct.json", rep);
      };
    });
  }

  // --- analyze ----------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("analyze", "rays / visibility / escape / decay");
    static std::string what, data_path, speed_field, phantom_path;
    static double speed = 1.0, speed_bg = 1.0, half = 1.0, T = 0, t_max = 0;
    static int directions = 16, nodes = 33, samples = 200;
    static std::vector<double> origin{0, 0, 0};
    sub->add_option("--what", what, "rays|visibility|escape|decay")->required();
    sub->add_option("--data", data_path, "data file carrying the geometry")
        ->required();
    sub->add_option("--speed", speed, "constant sound speed");
    sub->add_option("--speed-field", speed_field, "sampled speed TATF1 field");
    sub->add_option("--speed-bg", speed_bg, "speed outside the sampled field");
    sub->add_option("--directions", directions, "ray directions per node");
    sub->add_option("--nodes", nodes, "visibility grid nodes per axis");
    sub->add_option("--half", half, "visibility grid half extent");
    sub->add_option("--origin", origin, "ray fan origin")->expected(-3);
    sub->add_option("--t-max", t_max, "ray integration window (0 = automatic)");
    sub->add_option("--phantom", phantom_path, "initial pressure for decay");
    sub->add_option("--T", T, "decay window (0 = automatic)");
    sub->add_option("--samples", samples, "decay curve samples");
    sub->add_option("--out-dir", g.out_dir, "output directory");
    sub->add_option("--threads", g.threads, "worker threads");
    sub->callback([&] {
      action = [&] {
        const int threads = g.threads > 0 ? g.threads : 1;
        const LoadedData d = load_data(data_path, speed);
        const AcquisitionGeometry& geom = d.have_sino ? d.sino.geom : d.sensor.geom;
        const SoundSpeedField c = load_speed(speed_field, speed, speed_bg);
        json rep{{"what", what}};
        if (what == "escape") {
          EscapeOptions o;
          o.directions = directions;
          o.threads = threads;
          const EscapeReport er = escape_time(c, geom, o);
          rep["max_escape_time"] = er.max_escape_time;
          rep["trapping_suspected"] = er.trapping_suspected;
          rep["escaped"] = er.escaped;
          rep["total"] = er.total;
          rep["cap"] = er.cap;
          const CutoffChoice cc = choose_cutoff_time(c, geom);
          rep["suggested_cutoff_T"] = cc.T;
        } else if (what == "visibility") {
          const GridSpec grid = GridSpec::box(geom.n, nodes, -half, half);
          const VisibilityMap vm = visibility_map(c, geom, grid, directions, threads);
          ScalarField field(grid);
          field.v = vm.fraction;
          const std::string out_dir = g.out_dir.empty() ? "." : g.out_dir;
          fs::create_directories(out_dir);
          write_field_tatf((fs::path(out_dir) / "visibility.tatf").string(), field);
          export_pgm((fs::path(out_dir) / "visibility.pgm").string(), field, 0.0, 1.0);
          double worst = 1.0, mean = 0;
          for (double v : vm.fraction) {
            worst = std::min(worst, v);
            mean += v;
          }
          rep["worst_fraction"] = worst;
          rep["mean_fraction"] = mean / field.v.size();
          rep["files"] = {"visibility.tatf", "visibility.pgm"};
        } else if (what == "rays") {
          std::vector<RaySeed> seeds;
          const int D = std::max(4, directions);
          for (int k = 0; k < D; ++k) {
            const double th = 2 * pi * k / D;
            RaySeed s;
            s.x = {origin.size() > 0 ? origin[0] : 0.0,
                   origin.size() > 1 ? origin[1] : 0.0,
                   origin.size() > 2 ? origin[2] : 0.0};
            s.xi = {std::cos(th), std::sin(th), 0};
            seeds.push_back(s);
          }
          double tm = t_max;
          if (tm <= 0) {
            double cmin = c.is_constant() ? c.background
                                          : std::min(c.background,
                                                     c.field.min_value());
            tm = 3.0 * 2.0 * geom.bounding_radius() / cmin;
          }
          const RayBundle rb = trace_rays(c, geom, seeds, tm, 0, false, threads);
          json rays = json::array();
          for (const auto& r : rb.rays)
            rays.push_back(json{{"escaped", r.escaped},
                                {"escape_time", r.escape_time},
                                {"hamiltonian_drift", r.hamiltonian_drift},
                                {"valid", r.valid}});
          rep["rays"] = rays;
          rep["dt"] = rb.dt;
        } else if (what == "decay") {
          require(!phantom_path.empty(), "analyze decay: --phantom required");
          const ScalarField f = read_field_tatf(phantom_path);
          double TT = T;
          if (TT <= 0) TT = choose_cutoff_time(c, geom).T;
          const DecayCurve dc = energy_decay_curve(f, c, geom, TT, samples,
                                                   {0, 0.9, threads, 0});
          rep["t"] = dc.t;
          rep["energy"] = dc.energy;
        } else {
          throw std::invalid_argument("analyze: unknown --what \"" + what + "\"");
        }
        write_report(g.out_dir, "analyze_" + what + ".json", rep);
      };
    });
  }

  // --- rangecheck ---------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("rangecheck", "data-consistency residuals");
    static std::string data_path, eig_path;
    static int moments = -1, wave_nodes = 65;
    static bool wave3d = false;
    static double speed = 1.0;
    sub->add_option("--data", data_path, "sinogram or sensor TATF1 file")->required();
    sub->add_option("--moments", moments, "max moment order k");
    sub->add_option("--orth", eig_path, "eigensystem file for the orthogonality test");
    sub->add_flag("--wave3d", wave3d, "time-reversed wave test (3-D sensor data)");
    sub->add_option("--wave-nodes", wave_nodes, "wave test grid nodes per axis");
    sub->add_option("--speed", speed, "constant sound speed");
    sub->add_option("--out-dir", g.out_dir, "output directory");
    sub->add_option("--threads", g.threads, "worker threads");
    sub->callback([&] {
      action = [&] {
        const int threads = g.threads > 0 ? g.threads : 1;
        const LoadedData d = load_data(data_path, speed);
        json rep;
        const auto vmax = [](const std::vector<double>& v) {
          double m = 0;
          for (double x : v) m = std::max(m, x);
          return m;
        };
        if (moments >= 0) {
          require(d.have_sino, "rangecheck --moments: needs a sinogram file");
          const RangeReport r = check_moment_condition(d.sino, moments, threads);
          rep["moment_residual"] = r.moment_residual;
          rep["moment_threshold"] = r.moment_threshold;
          rep["moment_pass"] = vmax(r.moment_residual) <= r.moment_threshold;
        }
        if (!eig_path.empty()) {
          require(d.have_sino, "rangecheck --orth: needs a sinogram file");
          const EigenSystem eig = read_eigensystem_tatf(eig_path);
          const RangeReport r = check_orthogonality(d.sino, eig, threads);
          rep["orthogonality_residual"] = r.orthogonality_residual;
          rep["orthogonality_threshold"] = r.orthogonality_threshold;
          rep["orthogonality_pass"] =
              vmax(r.orthogonality_residual) <= r.orthogonality_threshold;
        }
        if (wave3d) {
          require(d.have_sensor, "rangecheck --wave3d: needs a sensor file");
          const RangeReport r = check_range_wave_odd(d.sensor, speed, wave_nodes,
                                                     threads);
          rep["wave_residual"] = r.wave_residual;
          rep["wave_threshold"] = r.wave_threshold;
          rep["wave_pass"] = r.wave_residual <= r.wave_threshold;
        }
        require(!rep.empty(),
                "rangecheck: pick at least one of --moments, --orth, --wave3d");
        write_report(g.out_dir, "rangecheck.json", rep);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run_action(action);
}
