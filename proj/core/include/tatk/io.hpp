#pragma once
// TATF1 container: one UTF-8 JSON header line, then raw little-endian f64
// payload, x-fastest for fields and detector-major for sinograms/sensor
// traces. The header carries kind ("field", "sinogram", "sensor", plus
// "eigsys"/"densities" for caches), dtype, shape and kind-specific metadata
// under "extra" (sinogram/sensor embed their acquisition geometry).

#include <string>

#include "tatk/data.hpp"
#include "tatk/field.hpp"

namespace tatk {

void write_field_tatf(const std::string& path, const ScalarField& f);
ScalarField read_field_tatf(const std::string& path);

void write_sinogram_tatf(const std::string& path, const SphericalSinogram& s);
SphericalSinogram read_sinogram_tatf(const std::string& path);

void write_sensor_tatf(const std::string& path, const SensorData& s);
SensorData read_sensor_tatf(const std::string& path);

// Peeks at the header and returns the kind string ("field", ...).
std::string tatf_kind(const std::string& path);

// 8-bit binary PGM with a linear window [lo, hi]; NaN-free input required.
// 3-D fields export the central z slice. A JSON sidecar (path + ".json")
// records the window and grid so values can be mapped back.
void export_pgm(const std::string& path, const ScalarField& f,
                double lo = 0.0, double hi = -1.0);  // hi < lo => min/max window

// JSON (de)serialization of geometries, shared by TATF1 headers, caches and
// pipeline configs. Implemented over nlohmann::json; string-level API here
// to keep the vendored header out of the public interface.
std::string geometry_to_json_string(const AcquisitionGeometry& g);
AcquisitionGeometry geometry_from_json_string(const std::string& s);

}  // namespace tatk
