#include "tatk/io.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "tatk/io_json.hpp"
#include "tatk/io_tatf.hpp"

namespace tatk {

using nlohmann::json;

namespace tatf_detail {

void write_tatf(const std::string& path, const json& header_in,
                const double* data, std::size_t count) {
  json header = header_in;
  header["magic"] = "TATF1";
  header["dtype"] = "f64le";
  for (std::size_t i = 0; i < count; ++i)
    if (!std::isfinite(data[i]))
      throw std::invalid_argument("TATF1 write: non-finite sample in " + path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("TATF1: cannot open for writing: " + path);
  const std::string line = header.dump();
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw std::runtime_error("TATF1: short write: " + path);
}

json read_header(std::ifstream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("TATF1: missing header line: " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const std::exception& e) {
    throw std::runtime_error("TATF1: bad header JSON in " + path + ": " + e.what());
  }
  if (header.value("magic", "") != std::string("TATF1"))
    throw std::runtime_error("TATF1: magic mismatch in " + path);
  if (header.value("dtype", "") != std::string("f64le"))
    throw std::runtime_error("TATF1: unsupported dtype in " + path);
  return header;
}

std::vector<double> read_payload(std::ifstream& in, const std::string& path,
                                 std::size_t count) {
  static_assert(sizeof(double) == 8, "f64 payloads need 8-byte doubles");
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(double))
    throw std::runtime_error("TATF1: truncated payload in " + path);
  char extra;
  if (in.read(&extra, 1))
    throw std::runtime_error("TATF1: payload longer than header declares in " + path);
  for (double v : data)
    if (!std::isfinite(v))
      throw std::runtime_error("TATF1: non-finite sample in " + path);
  return data;
}

}  // namespace tatf_detail

using tatf_detail::read_header;
using tatf_detail::read_payload;
using tatf_detail::write_tatf;

namespace {

std::size_t shape_product(const json& header, const std::string& path) {
  if (!header.contains("shape") || !header["shape"].is_array())
    throw std::runtime_error("TATF1: missing shape in " + path);
  std::size_t prod = 1;
  for (const auto& d : header["shape"]) {
    const std::int64_t v = d.get<std::int64_t>();
    if (v <= 0) throw std::runtime_error("TATF1: bad shape in " + path);
    prod *= static_cast<std::size_t>(v);
  }
  return prod;
}

}  // namespace

json geometry_to_json(const AcquisitionGeometry& g) {
  json j;
  j["n"] = g.n;
  switch (g.kind) {
    case GeometryKind::circle: j["kind"] = "circle"; break;
    case GeometryKind::arc: j["kind"] = "arc"; break;
    case GeometryKind::sphere: j["kind"] = "sphere"; break;
    case GeometryKind::cube_faces: j["kind"] = "cube_faces"; break;
    case GeometryKind::custom: j["kind"] = "custom"; break;
  }
  j["count"] = g.pos.size();
  j["radius"] = g.radius;
  j["center"] = g.center;
  j["theta0"] = g.theta0;
  j["theta1"] = g.theta1;
  j["box_lo"] = g.box_lo;
  j["box_hi"] = g.box_hi;
  j["per_side"] = g.per_side;
  j["full_count"] = g.full_count;
  if (g.kind == GeometryKind::custom) {
    json pos = json::array(), nrm = json::array(), wts = json::array();
    for (const auto& p : g.pos) pos.push_back(p);
    for (const auto& v : g.normal) nrm.push_back(v);
    for (double w : g.weight) wts.push_back(w);
    j["positions"] = std::move(pos);
    j["normals"] = std::move(nrm);
    j["weights"] = std::move(wts);
  }
  return j;
}

AcquisitionGeometry geometry_from_json(const json& j) {
  GeometryParams p;
  p.n = j.at("n").get<int>();
  const std::string kind = j.at("kind").get<std::string>();
  p.count = j.value("count", 0);
  p.radius = j.value("radius", 0.0);
  if (j.contains("center")) p.center = j["center"].get<std::array<double, 3>>();
  p.theta0 = j.value("theta0", 0.0);
  p.theta1 = j.value("theta1", 0.0);
  if (j.contains("box_lo")) p.box_lo = j["box_lo"].get<std::array<double, 3>>();
  if (j.contains("box_hi")) p.box_hi = j["box_hi"].get<std::array<double, 3>>();
  p.per_side = j.value("per_side", 0);
  if (kind == "circle") {
    p.kind = GeometryKind::circle;
  } else if (kind == "arc") {
    p.kind = GeometryKind::arc;
  } else if (kind == "sphere") {
    p.kind = GeometryKind::sphere;
  } else if (kind == "cube_faces") {
    p.kind = GeometryKind::cube_faces;
  } else if (kind == "custom") {
    p.kind = GeometryKind::custom;
    for (const auto& e : j.at("positions"))
      p.positions.push_back(e.get<std::array<double, 3>>());
    for (const auto& e : j.at("normals"))
      p.normals.push_back(e.get<std::array<double, 3>>());
    for (const auto& e : j.at("weights")) p.weights.push_back(e.get<double>());
  } else {
    throw std::runtime_error("geometry JSON: unknown kind: " + kind);
  }
  return make_geometry(p);
}

std::string geometry_to_json_string(const AcquisitionGeometry& g) {
  return geometry_to_json(g).dump();
}

AcquisitionGeometry geometry_from_json_string(const std::string& s) {
  return geometry_from_json(json::parse(s));
}

void write_field_tatf(const std::string& path, const ScalarField& f) {
  f.grid.validate();
  json h;
  h["kind"] = "field";
  h["n"] = f.grid.n;
  h["shape"] = std::vector<int>(f.grid.shape.begin(), f.grid.shape.begin() + f.grid.n);
  h["origin"] = std::vector<double>(f.grid.origin.begin(), f.grid.origin.begin() + f.grid.n);
  h["spacing"] =
      std::vector<double>(f.grid.spacing.begin(), f.grid.spacing.begin() + f.grid.n);
  h["extra"] = json::object();
  write_tatf(path, h, f.v.data(), f.v.size());
}

ScalarField read_field_tatf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("TATF1: cannot open: " + path);
  const json h = read_header(in, path);
  if (h.value("kind", "") != std::string("field"))
    throw std::runtime_error("TATF1: expected kind 'field' in " + path);
  GridSpec g;
  g.n = h.at("n").get<int>();
  const auto shape = h.at("shape").get<std::vector<int>>();
  const auto origin = h.at("origin").get<std::vector<double>>();
  const auto spacing = h.at("spacing").get<std::vector<double>>();
  if (static_cast<int>(shape.size()) != g.n || static_cast<int>(origin.size()) != g.n ||
      static_cast<int>(spacing.size()) != g.n)
    throw std::runtime_error("TATF1: shape/origin/spacing rank mismatch in " + path);
  for (int a = 0; a < g.n; ++a) {
    g.shape[a] = shape[a];
    g.origin[a] = origin[a];
    g.spacing[a] = spacing[a];
  }
  if (g.n == 2) g.shape[2] = 1;
  g.validate();
  ScalarField f(g);
  f.v = read_payload(in, path, shape_product(h, path));
  if (f.v.size() != g.size())
    throw std::runtime_error("TATF1: field size mismatch in " + path);
  return f;
}

void write_sinogram_tatf(const std::string& path, const SphericalSinogram& s) {
  s.validate();
  json h;
  h["kind"] = "sinogram";
  h["n"] = s.geom.n;
  h["shape"] = std::vector<std::size_t>{s.geom.size(), static_cast<std::size_t>(s.nr)};
  h["extra"] = {{"dr", s.dr},
                {"convention", s.conv == RadialConvention::integral ? "integral" : "mean"},
                {"geometry", geometry_to_json(s.geom)}};
  write_tatf(path, h, s.g.data(), s.g.size());
}

SphericalSinogram read_sinogram_tatf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("TATF1: cannot open: " + path);
  const json h = read_header(in, path);
  if (h.value("kind", "") != std::string("sinogram"))
    throw std::runtime_error("TATF1: expected kind 'sinogram' in " + path);
  const json& extra = h.at("extra");
  AcquisitionGeometry geom = geometry_from_json(extra.at("geometry"));
  const auto shape = h.at("shape").get<std::vector<std::int64_t>>();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0]) != geom.size())
    throw std::runtime_error("TATF1: sinogram shape mismatch in " + path);
  SphericalSinogram s(geom, static_cast<int>(shape[1]), extra.at("dr").get<double>(),
                      extra.at("convention").get<std::string>() == "mean"
                          ? RadialConvention::mean
                          : RadialConvention::integral);
  s.g = read_payload(in, path, shape_product(h, path));
  s.validate();
  return s;
}

void write_sensor_tatf(const std::string& path, const SensorData& s) {
  s.validate();
  json h;
  h["kind"] = "sensor";
  h["n"] = s.geom.n;
  h["shape"] = std::vector<std::size_t>{s.geom.size(), static_cast<std::size_t>(s.nt)};
  h["extra"] = {{"dt", s.dt}, {"geometry", geometry_to_json(s.geom)}};
  write_tatf(path, h, s.p.data(), s.p.size());
}

SensorData read_sensor_tatf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("TATF1: cannot open: " + path);
  const json h = read_header(in, path);
  if (h.value("kind", "") != std::string("sensor"))
    throw std::runtime_error("TATF1: expected kind 'sensor' in " + path);
  const json& extra = h.at("extra");
  AcquisitionGeometry geom = geometry_from_json(extra.at("geometry"));
  const auto shape = h.at("shape").get<std::vector<std::int64_t>>();
  if (shape.size() != 2 || static_cast<std::size_t>(shape[0]) != geom.size())
    throw std::runtime_error("TATF1: sensor shape mismatch in " + path);
  SensorData s(geom, static_cast<int>(shape[1]), extra.at("dt").get<double>());
  s.p = read_payload(in, path, shape_product(h, path));
  s.validate();
  return s;
}

std::string tatf_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("TATF1: cannot open: " + path);
  return read_header(in, path).value("kind", "");
}

void export_pgm(const std::string& path, const ScalarField& f, double lo, double hi) {
  require(f.finite(), "export_pgm: non-finite field");
  if (hi < lo) {
    lo = f.min_value();
    hi = f.max_value();
  }
  const double span = (hi > lo) ? hi - lo : 1.0;
  const int nx = f.grid.shape[0], ny = f.grid.shape[1];
  const int slice = f.grid.n == 3 ? f.grid.shape[2] / 2 : 0;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_pgm: cannot open " + path);
  out << "P5\n" << nx << " " << ny << "\n255\n";
  // image rows top-to-bottom = decreasing y
  for (int iy = ny - 1; iy >= 0; --iy)
    for (int ix = 0; ix < nx; ++ix) {
      const double t = (f.at(ix, iy, slice) - lo) / span;
      const int q = static_cast<int>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
      out.put(static_cast<char>(q));
    }
  if (!out) throw std::runtime_error("export_pgm: short write " + path);
  json side;
  side["window"] = {{"lo", lo}, {"hi", hi}};
  side["grid"] = {{"n", f.grid.n},
                  {"shape", std::vector<int>(f.grid.shape.begin(),
                                             f.grid.shape.begin() + f.grid.n)},
                  {"origin", std::vector<double>(f.grid.origin.begin(),
                                                 f.grid.origin.begin() + f.grid.n)},
                  {"spacing", std::vector<double>(f.grid.spacing.begin(),
                                                  f.grid.spacing.begin() + f.grid.n)}};
  if (f.grid.n == 3) side["slice_z_index"] = slice;
  std::ofstream sj(path + ".json");
  sj << side.dump(2) << "\n";
}

}  // namespace tatk
