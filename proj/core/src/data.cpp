#include "tatk/data.hpp"

#include <cmath>
#include <random>

namespace tatk {

SphericalSinogram SphericalSinogram::to_convention(RadialConvention target) const {
  if (target == conv) return *this;
  SphericalSinogram out = *this;
  out.conv = target;
  const double area = unit_sphere_area(geom.n);
  const int nm1 = geom.n - 1;
  for (std::size_t i = 0; i < geom.size(); ++i) {
    const double* src = row(i);
    double* dst = out.row(i);
    if (target == RadialConvention::integral) {
      dst[0] = 0.0;
      for (int j = 1; j < nr; ++j)
        dst[j] = src[j] * std::pow(j * dr, nm1) * area;
    } else {
      for (int j = 1; j < nr; ++j)
        dst[j] = src[j] / (std::pow(j * dr, nm1) * area);
      // quadratic extrapolation to r = 0 through the first three means
      if (nr >= 4)
        dst[0] = 3.0 * dst[1] - 3.0 * dst[2] + dst[3];
      else
        dst[0] = dst[1];
    }
  }
  return out;
}

double add_noise(std::vector<double>& samples, double level, std::uint64_t seed) {
  require(level >= 0, "add_noise: level must be >= 0");
  if (level == 0 || samples.empty()) return 0.0;
  double norm2 = 0;
  for (double v : samples) norm2 += v * v;
  if (norm2 == 0) return 0.0;

  // explicit Box-Muller on top of mt19937_64 keeps the stream portable
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    // (0,1]: avoids log(0)
    return (static_cast<double>(rng() >> 11) + 1.0) * (1.0 / 9007199254740993.0);
  };
  std::vector<double> z(samples.size());
  double znorm2 = 0;
  for (std::size_t i = 0; i < z.size(); i += 2) {
    const double u1 = uniform(), u2 = uniform();
    const double m = std::sqrt(-2.0 * std::log(u1));
    z[i] = m * std::cos(2.0 * pi * u2);
    if (i + 1 < z.size()) z[i + 1] = m * std::sin(2.0 * pi * u2);
  }
  for (double v : z) znorm2 += v * v;
  if (znorm2 == 0) return 0.0;
  const double scale = level * std::sqrt(norm2 / znorm2);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] += scale * z[i];
  return level;
}

double add_noise(SphericalSinogram& s, double level, std::uint64_t seed) {
  return add_noise(s.g, level, seed);
}

double add_noise(SensorData& s, double level, std::uint64_t seed) {
  return add_noise(s.p, level, seed);
}

}  // namespace tatk
