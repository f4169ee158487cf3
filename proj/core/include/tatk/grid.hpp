#pragma once
// Uniform Cartesian grid descriptor shared by fields and solvers.
// Storage order everywhere: x fastest, i.e. flat index = ix + nx*(iy + ny*iz).

#include <array>
#include <cstdint>
#include <cstddef>

#include "tatk/util.hpp"

namespace tatk {

struct GridSpec {
  int n = 2;                              // spatial dimension, 2 or 3
  std::array<int, 3> shape{0, 0, 1};      // nodes per axis; shape[2]==1 when n==2
  std::array<double, 3> origin{0, 0, 0};  // coordinates of node (0,0,0)
  std::array<double, 3> spacing{0, 0, 0}; // node spacing; spacing[2] ignored when n==2

  static GridSpec make(int n, std::array<int, 3> shape, std::array<double, 3> origin,
                       std::array<double, 3> spacing) {
    GridSpec g{n, shape, origin, spacing};
    g.validate();
    return g;
  }

  // Square/cube [lo,hi]^n with m nodes per axis.
  static GridSpec box(int n, int m, double lo, double hi) {
    require(m >= 2, "GridSpec: need at least 2 nodes per axis");
    const double h = (hi - lo) / (m - 1);
    GridSpec g;
    g.n = n;
    g.shape = {m, m, n == 3 ? m : 1};
    g.origin = {lo, lo, n == 3 ? lo : 0.0};
    g.spacing = {h, h, n == 3 ? h : 0.0};
    g.validate();
    return g;
  }

  void validate() const {
    require(n == 2 || n == 3, "GridSpec: dimension must be 2 or 3");
    for (int a = 0; a < n; ++a) {
      require(shape[a] >= 2, "GridSpec: each axis needs >= 2 nodes");
      require(spacing[a] > 0, "GridSpec: spacing must be positive");
    }
    if (n == 2) require(shape[2] == 1, "GridSpec: 2-D grid must have shape[2] == 1");
  }

  std::size_t size() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }

  std::size_t index(int ix, int iy, int iz = 0) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(shape[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(shape[1]) * iz);
  }

  double coord(int axis, int i) const { return origin[axis] + spacing[axis] * i; }

  double min_spacing() const {
    double h = spacing[0];
    for (int a = 1; a < n; ++a) h = std::min(h, spacing[a]);
    return h;
  }

  double max_extent() const {
    double e = 0;
    for (int a = 0; a < n; ++a) e = std::max(e, spacing[a] * (shape[a] - 1));
    return e;
  }

  bool operator==(const GridSpec& o) const {
    return n == o.n && shape == o.shape && origin == o.origin && spacing == o.spacing;
  }
};

}  // namespace tatk
