#include "tatk/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "tatk/analysis.hpp"
#include "tatk/data.hpp"
#include "tatk/fbp.hpp"
#include "tatk/forward.hpp"
#include "tatk/io.hpp"
#include "tatk/io_json.hpp"
#include "tatk/partial_data.hpp"
#include "tatk/series.hpp"
#include "tatk/time_reversal.hpp"

namespace tatk {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config: " + path + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected a JSON object");
  for (const auto& kv : obj.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (kv.key() == k) {
        ok = true;
        break;
      }
    if (!ok) bad(where.empty() ? kv.key() : where + "." + kv.key(), "unknown key");
  }
}

double num_at(const json& obj, const std::string& where, const char* key,
              double dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_number()) bad(where + "." + key, "expected a number");
  return v.get<double>();
}

long int_at(const json& obj, const std::string& where, const char* key, long dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  return v.get<long>();
}

bool bool_at(const json& obj, const std::string& where, const char* key, bool dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_boolean()) bad(where + "." + key, "expected true/false");
  return v.get<bool>();
}

std::string str_at(const json& obj, const std::string& where, const char* key,
                   const std::string& dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

std::array<double, 3> vec_at(const json& obj, const std::string& where,
                             const char* key, int n,
                             std::array<double, 3> dflt) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_array() || (static_cast<int>(v.size()) != n && v.size() != 3))
    bad(where + "." + key, "expected an array of " + std::to_string(n) + " numbers");
  std::array<double, 3> out{0, 0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) bad(where + "." + key, "expected numbers");
    out[i] = v[i].get<double>();
  }
  return out;
}

PhantomSpec parse_phantom(const json& j, int n, const std::string& where) {
  check_keys(j, where, {"scene", "mollify_width", "primitives"});
  const double moll = num_at(j, where, "mollify_width", 0.0);
  if (moll < 0) bad(where + ".mollify_width", "must be >= 0");
  const std::string scene = str_at(j, where, "scene",
                                   j.contains("primitives") ? "custom" : "standard");
  if (scene == "standard") {
    if (j.contains("primitives"))
      bad(where + ".primitives", "not allowed with scene \"standard\"");
    return standard_scene(n, moll);
  }
  if (scene != "custom") bad(where + ".scene", "expected \"standard\" or \"custom\"");
  if (!j.contains("primitives")) bad(where + ".primitives", "required for a custom scene");
  const json& prim = j.at("primitives");
  if (!prim.is_array() || prim.empty())
    bad(where + ".primitives", "expected a non-empty array");
  PhantomSpec spec;
  spec.n = n;
  spec.mollify_width = moll;
  for (std::size_t i = 0; i < prim.size(); ++i) {
    const std::string pw = where + ".primitives[" + std::to_string(i) + "]";
    check_keys(prim[i], pw, {"shape", "center", "semi_axes", "angle", "amplitude"});
    PhantomPrimitive p;
    const std::string shape = str_at(prim[i], pw, "shape", "ball");
    if (shape == "ball" || shape == "disk")
      p.shape = PrimitiveShape::ball;
    else if (shape == "ellipse")
      p.shape = PrimitiveShape::ellipse;
    else if (shape == "box")
      p.shape = PrimitiveShape::box;
    else
      bad(pw + ".shape", "expected ball/disk, ellipse or box");
    p.center = vec_at(prim[i], pw, "center", n, {0, 0, 0});
    p.semi_axes = vec_at(prim[i], pw, "semi_axes", n, {0.5, 0.5, 0.5});
    p.angle = num_at(prim[i], pw, "angle", 0.0);
    p.amplitude = num_at(prim[i], pw, "amplitude", 1.0);
    spec.primitives.push_back(p);
  }
  return spec;
}

GeometryParams parse_geometry(const json& j, int n, const std::string& where) {
  check_keys(j, where,
             {"kind", "radius", "center", "count", "theta0", "theta1", "box_lo",
              "box_hi", "per_side", "positions", "normals", "weights"});
  GeometryParams g;
  g.n = n;
  const std::string kind = str_at(j, where, "kind", "circle");
  if (kind == "circle")
    g.kind = GeometryKind::circle;
  else if (kind == "arc")
    g.kind = GeometryKind::arc;
  else if (kind == "sphere")
    g.kind = GeometryKind::sphere;
  else if (kind == "cube_faces")
    g.kind = GeometryKind::cube_faces;
  else if (kind == "custom")
    g.kind = GeometryKind::custom;
  else
    bad(where + ".kind", "unknown geometry kind \"" + kind + "\"");
  g.radius = num_at(j, where, "radius", 1.05);
  if (g.radius <= 0) bad(where + ".radius", "must be positive");
  g.center = vec_at(j, where, "center", n, {0, 0, 0});
  g.count = static_cast<int>(int_at(j, where, "count", 257));
  if (g.count <= 0) bad(where + ".count", "detector count must be positive");
  g.theta0 = num_at(j, where, "theta0", 0.0);
  g.theta1 = num_at(j, where, "theta1", 0.0);
  g.box_lo = vec_at(j, where, "box_lo", n, {-1, -1, -1});
  g.box_hi = vec_at(j, where, "box_hi", n, {1, 1, 1});
  g.per_side = static_cast<int>(int_at(j, where, "per_side", 16));
  if (g.per_side <= 0) bad(where + ".per_side", "must be positive");
  if (j.contains("positions")) {
    const json& P = j.at("positions");
    if (!P.is_array()) bad(where + ".positions", "expected an array of points");
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (!P[i].is_array() || (static_cast<int>(P[i].size()) != n && P[i].size() != 3))
        bad(where + ".positions", "each point needs " + std::to_string(n) +
                                      " coordinates");
      std::array<double, 3> p{0, 0, 0};
      for (std::size_t a = 0; a < P[i].size(); ++a) p[a] = P[i][a].get<double>();
      g.positions.push_back(p);
    }
  }
  if (j.contains("normals")) {
    const json& P = j.at("normals");
    if (!P.is_array()) bad(where + ".normals", "expected an array of vectors");
    for (std::size_t i = 0; i < P.size(); ++i) {
      std::array<double, 3> p{0, 0, 0};
      for (std::size_t a = 0; a < P[i].size() && a < 3; ++a)
        p[a] = P[i][a].get<double>();
      g.normals.push_back(p);
    }
  }
  if (j.contains("weights")) {
    const json& P = j.at("weights");
    if (!P.is_array()) bad(where + ".weights", "expected an array of numbers");
    for (std::size_t i = 0; i < P.size(); ++i) g.weights.push_back(P[i].get<double>());
  }
  return g;
}

const std::set<std::string>& known_methods() {
  static const std::set<std::string> k = {
      "kun2d",     "finch-log", "finch-deriv", "fpr-lap",      "fpr-dd",
      "fpr-mixed", "universal", "nguyen",      "nd",           "norton",
      "cube-series", "eigen-var", "time-reversal", "planewave", "zerofill",
      "algebraic"};
  return k;
}

MethodConfig parse_method(const json& j, const std::string& where) {
  check_keys(j, where,
             {"name", "smooth", "xi", "modes", "T", "cutoff", "reg", "lambda_max",
              "n_mag", "n_dir", "omega_nodes", "densities", "weighting",
              "taper_frac", "iterations", "solver", "quality"});
  MethodConfig m;
  m.name = str_at(j, where, "name", "");
  if (m.name.empty()) bad(where + ".name", "required");
  if (!known_methods().count(m.name))
    bad(where + ".name", "unknown method \"" + m.name + "\"");
  m.smooth = num_at(j, where, "smooth", 0.0);
  if (m.smooth < 0 || m.smooth > 1) bad(where + ".smooth", "must be in [0, 1]");
  m.xi = vec_at(j, where, "xi", 3, {0, 0, 0});
  m.modes = static_cast<int>(int_at(j, where, "modes", 128));
  if (m.modes <= 0) bad(where + ".modes", "must be positive");
  m.T = num_at(j, where, "T", 0.0);
  if (m.T < 0) bad(where + ".T", "must be >= 0 (0 = automatic)");
  m.cutoff = str_at(j, where, "cutoff", "zero");
  if (m.cutoff != "zero" && m.cutoff != "harmonic")
    bad(where + ".cutoff", "expected \"zero\" or \"harmonic\"");
  m.reg = num_at(j, where, "reg", 0.0);
  if (m.reg < 0) bad(where + ".reg", "must be >= 0 (0 = automatic)");
  m.lambda_max = num_at(j, where, "lambda_max", 0.0);
  if (m.lambda_max < 0) bad(where + ".lambda_max", "must be >= 0");
  m.n_mag = static_cast<int>(int_at(j, where, "n_mag", 48));
  m.n_dir = static_cast<int>(int_at(j, where, "n_dir", 48));
  if (m.n_mag < 4) bad(where + ".n_mag", "need at least 4 magnitudes");
  if (m.n_dir < 2) bad(where + ".n_dir", "need at least 2 directions");
  m.omega_nodes = static_cast<int>(int_at(j, where, "omega_nodes", 33));
  if (m.omega_nodes < 4) bad(where + ".omega_nodes", "too few collocation nodes");
  m.densities = str_at(j, where, "densities", "");
  m.weighting = str_at(j, where, "weighting", "none");
  if (m.weighting != "none" && m.weighting != "direction")
    bad(where + ".weighting", "expected \"none\" or \"direction\"");
  m.taper_frac = num_at(j, where, "taper_frac", 0.05);
  if (m.taper_frac < 0 || m.taper_frac > 0.5)
    bad(where + ".taper_frac", "must be in [0, 0.5]");
  m.iterations = static_cast<int>(int_at(j, where, "iterations", 20));
  if (m.iterations <= 0) bad(where + ".iterations", "must be positive");
  m.solver = str_at(j, where, "solver", "cg");
  if (m.solver != "cg" && m.solver != "landweber")
    bad(where + ".solver", "expected \"cg\" or \"landweber\"");
  m.quality = num_at(j, where, "quality", 1.0);
  if (m.quality <= 0) bad(where + ".quality", "must be positive");
  return m;
}

RunConfig parse_config_json(const json& j) {
  check_keys(j, "",
             {"n", "threads", "seed", "deterministic", "out_dir", "phantom",
              "geometry", "forward", "noise", "grid", "methods"});
  RunConfig cfg;
  cfg.n = static_cast<int>(int_at(j, "", "n", 2));
  if (cfg.n != 2 && cfg.n != 3) bad("n", "dimension must be 2 or 3");
  cfg.threads = static_cast<int>(int_at(j, "", "threads", 1));
  if (cfg.threads < 1) bad("threads", "must be >= 1");
  if (j.contains("seed")) {
    const json& v = j.at("seed");
    if (!v.is_number_integer()) bad("seed", "expected a non-negative integer");
    if (!v.is_number_unsigned() && v.get<long long>() < 0)
      bad("seed", "expected a non-negative integer");
    cfg.seed = v.get<std::uint64_t>();
  }
  cfg.deterministic = bool_at(j, "", "deterministic", true);
  cfg.out_dir = str_at(j, "", "out_dir", "tatk_run");
  if (cfg.out_dir.empty()) bad("out_dir", "must not be empty");

  cfg.phantom = j.contains("phantom") ? parse_phantom(j.at("phantom"), cfg.n, "phantom")
                                      : standard_scene(cfg.n);
  cfg.geometry = j.contains("geometry")
                     ? parse_geometry(j.at("geometry"), cfg.n, "geometry")
                     : [&] {
                         GeometryParams g;
                         g.n = cfg.n;
                         g.kind = cfg.n == 2 ? GeometryKind::circle : GeometryKind::sphere;
                         g.radius = 1.05;
                         g.count = cfg.n == 2 ? 257 : 1024;
                         return g;
                       }();

  if (j.contains("forward")) {
    const json& f = j.at("forward");
    check_keys(f, "forward", {"model", "radii", "rmax", "speed", "time", "quality"});
    cfg.forward_model = str_at(f, "forward", "model", "smt");
    if (cfg.forward_model != "smt" && cfg.forward_model != "fdtd")
      bad("forward.model", "expected \"smt\" or \"fdtd\"");
    cfg.radii = static_cast<int>(int_at(f, "forward", "radii", 129));
    if (cfg.radii < 2) bad("forward.radii", "need at least 2 radii");
    cfg.rmax = num_at(f, "forward", "rmax", 0.0);
    if (cfg.rmax < 0) bad("forward.rmax", "must be >= 0 (0 = automatic)");
    cfg.speed = num_at(f, "forward", "speed", 1.0);
    if (cfg.speed <= 0) bad("forward.speed", "must be positive");
    cfg.time_window = num_at(f, "forward", "time", 0.0);
    if (cfg.time_window < 0) bad("forward.time", "must be >= 0 (0 = automatic)");
    cfg.quality = num_at(f, "forward", "quality", 1.0);
    if (cfg.quality <= 0) bad("forward.quality", "must be positive");
  }
  if (j.contains("noise")) {
    const json& f = j.at("noise");
    check_keys(f, "noise", {"level"});
    cfg.noise_level = num_at(f, "noise", "level", 0.0);
    if (cfg.noise_level < 0) bad("noise.level", "must be >= 0");
  }
  if (j.contains("grid")) {
    const json& f = j.at("grid");
    check_keys(f, "grid", {"nodes", "half_extent"});
    cfg.grid_nodes = static_cast<int>(int_at(f, "grid", "nodes", 129));
    if (cfg.grid_nodes < 2) bad("grid.nodes", "need at least 2 nodes per axis");
    cfg.grid_half = num_at(f, "grid", "half_extent", 1.0);
    if (cfg.grid_half <= 0) bad("grid.half_extent", "must be positive");
  }
  if (j.contains("methods")) {
    const json& M = j.at("methods");
    if (!M.is_array() || M.empty()) bad("methods", "expected a non-empty array");
    for (std::size_t i = 0; i < M.size(); ++i)
      cfg.methods.push_back(
          parse_method(M[i], "methods[" + std::to_string(i) + "]"));
  } else {
    MethodConfig m;
    m.name = "kun2d";
    cfg.methods.push_back(m);
  }
  cfg.validate();
  return cfg;
}

json primitive_to_json(const PhantomPrimitive& p) {
  const char* shape = p.shape == PrimitiveShape::ball      ? "ball"
                      : p.shape == PrimitiveShape::ellipse ? "ellipse"
                                                           : "box";
  return json{{"shape", shape},
              {"center", p.center},
              {"semi_axes", p.semi_axes},
              {"angle", p.angle},
              {"amplitude", p.amplitude}};
}

json config_to_json(const RunConfig& cfg) {
  json prims = json::array();
  for (const auto& p : cfg.phantom.primitives) prims.push_back(primitive_to_json(p));
  const char* gk = cfg.geometry.kind == GeometryKind::circle       ? "circle"
                   : cfg.geometry.kind == GeometryKind::arc        ? "arc"
                   : cfg.geometry.kind == GeometryKind::sphere     ? "sphere"
                   : cfg.geometry.kind == GeometryKind::cube_faces ? "cube_faces"
                                                                   : "custom";
  json geo{{"kind", gk},
           {"radius", cfg.geometry.radius},
           {"center", cfg.geometry.center},
           {"count", cfg.geometry.count},
           {"theta0", cfg.geometry.theta0},
           {"theta1", cfg.geometry.theta1},
           {"box_lo", cfg.geometry.box_lo},
           {"box_hi", cfg.geometry.box_hi},
           {"per_side", cfg.geometry.per_side}};
  if (!cfg.geometry.positions.empty()) {
    geo["positions"] = cfg.geometry.positions;
    geo["normals"] = cfg.geometry.normals;
    geo["weights"] = cfg.geometry.weights;
  }
  json methods = json::array();
  for (const auto& m : cfg.methods)
    methods.push_back(json{{"name", m.name},
                           {"smooth", m.smooth},
                           {"xi", m.xi},
                           {"modes", m.modes},
                           {"T", m.T},
                           {"cutoff", m.cutoff},
                           {"reg", m.reg},
                           {"lambda_max", m.lambda_max},
                           {"n_mag", m.n_mag},
                           {"n_dir", m.n_dir},
                           {"omega_nodes", m.omega_nodes},
                           {"densities", m.densities},
                           {"weighting", m.weighting},
                           {"taper_frac", m.taper_frac},
                           {"iterations", m.iterations},
                           {"solver", m.solver},
                           {"quality", m.quality}});
  return json{{"n", cfg.n},
              {"threads", cfg.threads},
              {"seed", cfg.seed},
              {"deterministic", cfg.deterministic},
              {"out_dir", cfg.out_dir},
              {"phantom", json{{"scene", "custom"},
                               {"mollify_width", cfg.phantom.mollify_width},
                               {"primitives", prims}}},
              {"geometry", geo},
              {"forward", json{{"model", cfg.forward_model},
                               {"radii", cfg.radii},
                               {"rmax", cfg.rmax},
                               {"speed", cfg.speed},
                               {"time", cfg.time_window},
                               {"quality", cfg.quality}}},
              {"noise", json{{"level", cfg.noise_level}}},
              {"grid", json{{"nodes", cfg.grid_nodes},
                            {"half_extent", cfg.grid_half}}},
              {"methods", methods}};
}

// --- pipeline stages -------------------------------------------------------

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage ") + name + ": " + e.what());
  }
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "manifest: cannot open " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    const std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a(buf, static_cast<std::size_t>(got), h);
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// truncate or zero-extend sensor traces to the window [0, T]
SensorData fit_window(const SensorData& d, double T) {
  require(T > 0, "time window must be positive");
  const int nt = std::max<int>(2, static_cast<int>(std::lround(T / d.dt)) + 1);
  SensorData out(d.geom, nt, d.dt);
  for (std::size_t i = 0; i < d.geom.size(); ++i)
    for (int k = 0; k < nt; ++k) out.at(i, k) = d.sample(i, k * d.dt);
  return out;
}

struct PipelineIO {
  fs::path dir;
  std::vector<std::string> files;  // manifest entries, relative paths

  std::string path(const std::string& rel) const { return (dir / rel).string(); }
  void note(const std::string& rel) { files.push_back(rel); }
  void write_json(const std::string& rel, const json& j) {
    std::ofstream out(path(rel), std::ios::binary);
    require(out.good(), "cannot write " + path(rel));
    out << j.dump(2) << "\n";
    require(out.good(), "write failed: " + path(rel));
  }
};

// Pressure traces derived from mean data. The record is long enough for every
// configured time-domain method; the means are zero-extended radially first,
// which is exact once spheres no longer meet the phantom support.
SensorData derive_sensor(const SphericalSinogram& sino, const RunConfig& cfg,
                         const AcquisitionGeometry& geom) {
  double T = sino.r_max() / cfg.speed;
  for (const auto& m : cfg.methods) {
    if (m.name != "time-reversal" && m.name != "eigen-var") continue;
    double t = m.T;
    if (t <= 0)
      t = choose_cutoff_time(SoundSpeedField::constant(cfg.speed), geom).T;
    T = std::max(T, t);
  }
  SphericalSinogram means = sino.to_convention(RadialConvention::mean);
  const int need = static_cast<int>(std::ceil(cfg.speed * T / means.dr)) + 1;
  if (need > means.nr) {
    SphericalSinogram ext(means.geom, need, means.dr, RadialConvention::mean);
    for (std::size_t i = 0; i < means.geom.size(); ++i)
      std::copy(means.row(i), means.row(i) + means.nr, ext.row(i));
    means = std::move(ext);
  }
  return means_to_pressure(means, cfg.speed);
}

}  // namespace

ScalarField run_method(const MethodConfig& mc, const MethodContext& ctx,
                       const SphericalSinogram& sino, const SensorData* sensor,
                       const GridSpec& grid) {
  const auto fbp_opts = FbpOptions{ctx.threads, mc.xi};
  SphericalSinogram s = sino;
  if (mc.smooth > 0) s = smooth_filter(s, mc.smooth);
  const fs::path cache_dir(ctx.cache_dir.empty() ? std::string(".") : ctx.cache_dir);
  const auto cache_path = [&](const std::string& rel) {
    fs::create_directories(cache_dir);
    return (cache_dir / rel).string();
  };
  const auto note_cache = [&](const std::string& rel) {
    if (ctx.cache_files) ctx.cache_files->push_back(rel);
  };

  if (mc.name == "kun2d")
    return invert_fbp_2d(s, grid, Fbp2dFormula::kun2d, fbp_opts);
  if (mc.name == "finch-log")
    return invert_fbp_2d(s, grid, Fbp2dFormula::finch_log, fbp_opts);
  if (mc.name == "finch-deriv")
    return invert_fbp_2d(s, grid, Fbp2dFormula::finch_deriv, fbp_opts);
  if (mc.name == "fpr-lap")
    return invert_fbp_3d(s, grid, Fbp3dFormula::fpr_laplacian, fbp_opts);
  if (mc.name == "fpr-dd")
    return invert_fbp_3d(s, grid, Fbp3dFormula::fpr_dderiv, fbp_opts);
  if (mc.name == "fpr-mixed")
    return invert_fbp_3d(s, grid, Fbp3dFormula::fpr_mixed, fbp_opts);
  if (mc.name == "universal")
    return invert_fbp_3d(s, grid, Fbp3dFormula::universal, fbp_opts);
  if (mc.name == "nguyen")
    return invert_fbp_3d(s, grid, Fbp3dFormula::nguyen, fbp_opts);
  if (mc.name == "nd") return invert_fbp_nd(s, grid, {ctx.threads, 0, 0});
  if (mc.name == "norton") {
    NortonOptions o;
    o.threads = ctx.threads;
    return invert_norton_2d(s, grid, o);
  }
  if (mc.name == "zerofill") {
    ZeroFillOptions o;
    o.weighting = mc.weighting == "direction" ? ZeroFillWeighting::direction
                                              : ZeroFillWeighting::none;
    o.taper_frac = mc.taper_frac;
    o.threads = ctx.threads;
    return invert_zero_fill(s, grid, o);
  }
  if (mc.name == "algebraic") {
    AlgebraicOptions o;
    o.iterations = mc.iterations;
    o.method = mc.solver == "cg" ? AlgebraicMethod::cg : AlgebraicMethod::landweber;
    o.quality = mc.quality;
    o.threads = ctx.threads;
    return invert_algebraic(s, grid, o);
  }
  if (mc.name == "planewave") {
    require(grid.n == 2, "planewave: 2-D only");
    const GridSpec omega = GridSpec::make(
        2, {mc.omega_nodes, mc.omega_nodes, 1},
        {grid.origin[0], grid.origin[1], 0},
        {(grid.coord(0, grid.shape[0] - 1) - grid.origin[0]) / (mc.omega_nodes - 1),
         (grid.coord(1, grid.shape[1] - 1) - grid.origin[1]) / (mc.omega_nodes - 1),
         0});
    XiGrid xi = XiGrid::uniform(mc.lambda_max > 0 ? mc.lambda_max : pi / s.dr,
                                mc.n_mag, mc.n_dir);
    const std::string key = densities_cache_key(s.geom, xi, mc.reg);
    const std::string rel = "densities_" + key + ".tatf";
    const std::string path = mc.densities.empty() ? cache_path(rel) : mc.densities;
    PlaneWaveDensities dens;
    if (fs::exists(path)) {
      dens = read_densities_tatf(path);
      require(dens.geom.content_hash() == s.geom.content_hash() &&
                  dens.xi.magnitudes == xi.magnitudes &&
                  dens.xi.directions == xi.directions,
              "planewave: densities cache does not match this run "
              "(geometry or frequency grid differ)");
    } else {
      DensityOptions o;
      o.reg = mc.reg;
      o.threads = ctx.threads;
      dens = precompute_densities(s.geom, omega, xi, o);
      write_densities_tatf(path, dens);
    }
    if (mc.densities.empty()) note_cache(rel);
    return invert_planewave(s, dens, grid, {ctx.threads});
  }
  if (mc.name == "cube-series" || mc.name == "eigen-var") {
    const AcquisitionGeometry& ag = mc.name == "eigen-var" && sensor
                                        ? sensor->geom
                                        : s.geom;
    require(ag.kind == GeometryKind::cube_faces,
            mc.name + ": needs cube_faces acquisition");
    for (int a = 1; a < ag.n; ++a)
      require(ag.box_lo[a] == ag.box_lo[0] && ag.box_hi[a] == ag.box_hi[0],
              mc.name + ": the acquisition box must be a cube");
    const EigenRegion region =
        EigenRegion::cube(ag.n, ag.box_lo[0], ag.box_hi[0], grid.shape[0]);
    // cube-series pairs data with plain-Laplacian modes; eigen-var needs the
    // weighted (c^-2) system, here with the run's constant speed
    const bool weighted = mc.name == "eigen-var";
    const std::string rel = std::string("eigsys_") + (weighted ? "w_" : "p_") +
                            std::to_string(mc.modes) + "_" +
                            std::to_string(grid.shape[0]) + ".tatf";
    const std::string path = cache_path(rel);
    EigenSystem eig;
    if (fs::exists(path)) {
      eig = read_eigensystem_tatf(path);
      require(static_cast<int>(eig.size()) == mc.modes &&
                  eig.region.grid.shape == region.grid.shape &&
                  eig.weighted == weighted &&
                  (!weighted || eig.speed.background == ctx.speed),
              mc.name + ": eigensystem cache does not match this run");
    } else {
      const SoundSpeedField cc = SoundSpeedField::constant(ctx.speed);
      eig = eigensystem_dirichlet(region, weighted ? &cc : nullptr, mc.modes,
                                  ctx.threads);
      write_eigensystem_tatf(path, eig);
    }
    note_cache(rel);
    if (mc.name == "cube-series") return invert_cube_series(s, eig, {ctx.threads});
    require(sensor != nullptr, "eigen-var: no time-domain data in this run");
    EigenVarOptions o;
    o.threads = ctx.threads;
    return invert_eigen_variable(*sensor, eig, o);
  }
  if (mc.name == "time-reversal") {
    require(sensor != nullptr, "time-reversal: no time-domain data in this run");
    const SoundSpeedField c = SoundSpeedField::constant(ctx.speed);
    double T = mc.T;
    if (T <= 0) T = choose_cutoff_time(c, sensor->geom).T;
    const SensorData win = fit_window(*sensor, T);
    TimeReversalOptions o;
    o.cutoff = mc.cutoff == "harmonic" ? CutoffMode::harmonic : CutoffMode::zero;
    o.threads = ctx.threads;
    return time_reverse(win, c, grid, o);
  }
  throw std::invalid_argument("unknown method \"" + mc.name + "\"");
}

void RunConfig::validate() const {
  require(n == 2 || n == 3, "config: n: dimension must be 2 or 3");
  require(threads >= 1, "config: threads: must be >= 1");
  require(!out_dir.empty(), "config: out_dir: must not be empty");
  phantom.validate();
  require(phantom.n == n, "config: phantom dimension differs from n");
  require(geometry.n == n, "config: geometry dimension differs from n");
  require(geometry.count > 0, "config: geometry.count: detector count must be positive");
  require(forward_model == "smt" || forward_model == "fdtd",
          "config: forward.model: expected \"smt\" or \"fdtd\"");
  require(radii >= 2, "config: forward.radii: need at least 2 radii");
  require(rmax >= 0, "config: forward.rmax: must be >= 0");
  require(speed > 0, "config: forward.speed: must be positive");
  require(time_window >= 0, "config: forward.time: must be >= 0");
  require(quality > 0, "config: forward.quality: must be positive");
  require(noise_level >= 0, "config: noise.level: must be >= 0");
  require(grid_nodes >= 2, "config: grid.nodes: need at least 2 nodes per axis");
  require(grid_half > 0, "config: grid.half_extent: must be positive");
  require(!methods.empty(), "config: methods: at least one method required");
  for (const auto& m : methods)
    require(known_methods().count(m.name),
            "config: methods: unknown method \"" + m.name + "\"");
}

RunConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string config_to_json_text(const RunConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

RunResult run_pipeline(const RunConfig& cfg) {
  cfg.validate();
  PipelineIO io;
  io.dir = cfg.out_dir;
  fs::create_directories(io.dir);

  RunResult result;
  result.out_dir = cfg.out_dir;

  const std::string config_text = config_to_json_text(cfg);
  {
    std::ofstream out(io.path("config.json"), std::ios::binary);
    require(out.good(), "cannot write " + io.path("config.json"));
    out << config_text;
  }
  io.note("config.json");

  const AcquisitionGeometry geom = stage("geometry", [&] {
    return make_geometry(cfg.geometry);
  });
  const GridSpec grid = GridSpec::box(cfg.n, cfg.grid_nodes, -cfg.grid_half,
                                      cfg.grid_half);

  // phantom
  const ScalarField f = stage("phantom", [&] {
    ScalarField ph = make_phantom(cfg.phantom, grid);
    write_field_tatf(io.path("phantom.tatf"), ph);
    export_pgm(io.path("phantom.pgm"), ph);
    return ph;
  });
  io.note("phantom.tatf");
  io.note("phantom.pgm");
  io.note("phantom.pgm.json");

  // forward model; the automatic radial window records exactly while spheres
  // can still meet the phantom support (falling back to the grid reach for an
  // empty scene), which buys radial resolution at no cost in data content
  const double rmax = [&] {
    if (cfg.rmax > 0) return cfg.rmax;
    const double s = support_radius(cfg.phantom);
    if (s <= 0) return geom.max_distance_to(grid);
    double m = 0;
    for (const auto& p : geom.pos)
      m = std::max(m, std::sqrt(sq(p[0]) + sq(p[1]) + sq(p[2])));
    return m + s;
  }();
  const bool want_sensor = [&] {
    if (cfg.forward_model == "fdtd") return true;
    for (const auto& m : cfg.methods)
      if (m.name == "time-reversal" || m.name == "eigen-var") return true;
    return false;
  }();

  SphericalSinogram sino;
  SensorData sensor;
  bool have_sensor = false;
  stage("forward", [&] {
    if (cfg.forward_model == "smt") {
      sino = spherical_mean_transform(f, geom, cfg.radii, rmax,
                                      RadialConvention::integral, cfg.quality,
                                      cfg.threads);
      write_sinogram_tatf(io.path("sinogram.tatf"), sino);
      io.note("sinogram.tatf");
      if (want_sensor) {
        require(cfg.n == 2 || cfg.n == 3, "bad dimension");
        sensor = derive_sensor(sino, cfg, geom);
        write_sensor_tatf(io.path("sensor.tatf"), sensor);
        io.note("sensor.tatf");
        have_sensor = true;
      }
    } else {
      const double T = cfg.time_window > 0 ? cfg.time_window : rmax / cfg.speed;
      FdtdOptions o;
      o.threads = cfg.threads;
      sensor = fdtd_forward(f, SoundSpeedField::constant(cfg.speed), geom, T, o);
      write_sensor_tatf(io.path("sensor.tatf"), sensor);
      io.note("sensor.tatf");
      have_sensor = true;
      sino = pressure_to_means(sensor, cfg.speed)
                 .to_convention(RadialConvention::integral);
      write_sinogram_tatf(io.path("sinogram.tatf"), sino);
      io.note("sinogram.tatf");
    }
    return 0;
  });

  // noise: applied to the measured object; the derived one is recomputed
  if (cfg.noise_level > 0) {
    stage("noise", [&] {
      if (cfg.forward_model == "smt") {
        result.noise_achieved = add_noise(sino, cfg.noise_level, cfg.seed);
        write_sinogram_tatf(io.path("sinogram_noisy.tatf"), sino);
        io.note("sinogram_noisy.tatf");
        if (have_sensor) {
          sensor = derive_sensor(sino, cfg, geom);
          write_sensor_tatf(io.path("sensor_noisy.tatf"), sensor);
          io.note("sensor_noisy.tatf");
        }
      } else {
        result.noise_achieved = add_noise(sensor, cfg.noise_level, cfg.seed);
        write_sensor_tatf(io.path("sensor_noisy.tatf"), sensor);
        io.note("sensor_noisy.tatf");
        sino = pressure_to_means(sensor, cfg.speed)
                   .to_convention(RadialConvention::integral);
        write_sinogram_tatf(io.path("sinogram_noisy.tatf"), sino);
        io.note("sinogram_noisy.tatf");
      }
      return 0;
    });
  }

  // reconstructions
  MethodContext ctx;
  ctx.threads = cfg.threads;
  ctx.speed = cfg.speed;
  ctx.cache_dir = cfg.out_dir;
  std::vector<std::string> cache_files;
  ctx.cache_files = &cache_files;
  std::set<std::string> used_names;
  for (const auto& mc : cfg.methods) {
    std::string uname = mc.name;
    for (int k = 2; used_names.count(uname); ++k)
      uname = mc.name + "_" + std::to_string(k);
    used_names.insert(uname);

    MethodMetrics mm;
    mm.name = uname;
    const auto t0 = std::chrono::steady_clock::now();
    const ScalarField rec = stage(("reconstruct/" + uname).c_str(), [&] {
      return run_method(mc, ctx, sino, have_sensor ? &sensor : nullptr, grid);
    });
    mm.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                     .count();
    stage(("write/" + uname).c_str(), [&] {
      write_field_tatf(io.path("recon_" + uname + ".tatf"), rec);
      export_pgm(io.path("recon_" + uname + ".pgm"), rec);
      return 0;
    });
    io.note("recon_" + uname + ".tatf");
    io.note("recon_" + uname + ".pgm");
    io.note("recon_" + uname + ".pgm.json");
    const ScalarField ref = make_phantom(cfg.phantom, rec.grid);
    mm.rel_l2_error = rel_l2_error(rec, ref);
    result.metrics.push_back(mm);
  }
  for (const auto& rel : cache_files) io.note(rel);

  // analysis: data-consistency and escape summaries (best effort, recorded
  // even when a check does not apply to this acquisition)
  stage("analysis", [&] {
    json rep;
    try {
      const RangeReport r = check_moment_condition(sino, 2, cfg.threads);
      rep["moment_residual"] = r.moment_residual;
    } catch (const std::exception& e) {
      rep["moment_residual_error"] = e.what();
    }
    try {
      const EscapeReport er =
          escape_time(SoundSpeedField::constant(cfg.speed), geom, {});
      rep["escape"] = {{"max_escape_time", er.max_escape_time},
                       {"trapping_suspected", er.trapping_suspected},
                       {"escaped", er.escaped},
                       {"total", er.total}};
    } catch (const std::exception& e) {
      rep["escape_error"] = e.what();
    }
    io.write_json("analysis.json", rep);
    return 0;
  });
  io.note("analysis.json");

  // metrics report (wall-clock timings; deliberately outside the manifest)
  {
    json jm;
    jm["noise_level"] = cfg.noise_level;
    jm["noise_achieved"] = result.noise_achieved;
    json arr = json::array();
    for (const auto& m : result.metrics)
      arr.push_back(json{{"name", m.name},
                         {"seconds", m.seconds},
                         {"rel_l2_error", m.rel_l2_error}});
    jm["methods"] = arr;
    io.write_json("metrics.json", jm);
    result.metrics_path = io.path("metrics.json");
  }

  // manifest, written last
  {
    std::sort(io.files.begin(), io.files.end());
    io.files.erase(std::unique(io.files.begin(), io.files.end()), io.files.end());
    json files = json::array();
    for (const auto& rel : io.files)
      files.push_back(json{{"path", rel}, {"fnv64", hex64(hash_file(io.path(rel)))}});
    json man{{"config_hash", hex64(fnv1a(config_text))},
             {"seed", cfg.seed},
             {"deterministic", cfg.deterministic},
             {"files", files}};
    io.write_json("manifest.json", man);
    result.manifest_path = io.path("manifest.json");
  }
  return result;
}

bool validate_manifest(const std::string& manifest_path, std::string* err) {
  try {
    std::ifstream in(manifest_path, std::ios::binary);
    require(in.good(), "cannot open " + manifest_path);
    json man = json::parse(in);
    const fs::path dir = fs::path(manifest_path).parent_path();
    for (const auto& f : man.at("files")) {
      const std::string rel = f.at("path").get<std::string>();
      const std::string want = f.at("fnv64").get<std::string>();
      const std::string p = (dir / rel).string();
      if (!fs::exists(p)) {
        if (err) *err = "missing file: " + rel;
        return false;
      }
      if (hex64(hash_file(p)) != want) {
        if (err) *err = "hash mismatch: " + rel;
        return false;
      }
    }
    return true;
  } catch (const std::exception& e) {
    if (err) *err = e.what();
    return false;
  }
}

}  // namespace tatk
