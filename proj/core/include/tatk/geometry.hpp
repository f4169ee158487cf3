#pragma once
// Acquisition surface S: detector positions, outward unit normals and
// quadrature weights, plus enough shape metadata for methods that need the
// analytic surface (backprojection formulas, eigenfunction traces, clamping).

#include <array>
#include <cstdint>
#include <vector>

#include "tatk/grid.hpp"

namespace tatk {

enum class GeometryKind { circle, arc, sphere, cube_faces, custom };

struct GeometryParams {
  GeometryKind kind = GeometryKind::circle;
  int n = 2;                       // ambient dimension
  double radius = 1.0;             // circle / arc / sphere
  std::array<double, 3> center{0, 0, 0};
  int count = 64;                  // circle / arc / sphere: number of detectors
  double theta0 = 0.0, theta1 = 0.0;  // arc: angular range [theta0, theta1]
  std::array<double, 3> box_lo{-1, -1, -1};  // cube_faces
  std::array<double, 3> box_hi{1, 1, 1};
  int per_side = 16;               // cube_faces: detectors per axis per face
  // custom:
  std::vector<std::array<double, 3>> positions;
  std::vector<std::array<double, 3>> normals;
  std::vector<double> weights;
};

struct AcquisitionGeometry {
  int n = 2;
  GeometryKind kind = GeometryKind::circle;
  std::vector<std::array<double, 3>> pos;
  std::vector<std::array<double, 3>> normal;  // outward unit normal of S
  std::vector<double> weight;                 // arc-length / area weights
  // shape metadata (meaning depends on kind)
  double radius = 0;
  std::array<double, 3> center{0, 0, 0};
  double theta0 = 0, theta1 = 0;
  std::array<double, 3> box_lo{0, 0, 0}, box_hi{0, 0, 0};
  int per_side = 0;
  // for arcs cut from a notional full circle: detectors occupy angular slots
  // of width 2*pi/full_count
  int full_count = 0;

  std::size_t size() const { return pos.size(); }
  bool closed() const {
    return kind == GeometryKind::circle || kind == GeometryKind::sphere ||
           kind == GeometryKind::cube_faces;
  }
  double total_weight() const {
    double s = 0;
    for (double w : weight) s += w;
    return s;
  }
  // radius of the smallest ball around `center` containing all detectors
  double bounding_radius() const;
  // max |x - y| over detectors y and points x of the grid hull
  double max_distance_to(const GridSpec& g) const;

  std::uint64_t content_hash() const;
  void validate() const;
};

AcquisitionGeometry make_geometry(const GeometryParams& p);

}  // namespace tatk
