#include "common.hpp"

namespace tt {

void gauss_nodes(int m, std::vector<double>& x, std::vector<double>& w) {
  x.resize(m);
  w.resize(m);
  for (int i = 0; i < m; ++i) {
    double t = std::cos(pi * (i + 0.75) / (m + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = t;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = m * (t * p1 - p0) / (t * t - 1);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    double p0 = 1, p1 = t;
    for (int k = 2; k <= m; ++k) {
      const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = m * (t * p1 - p0) / (t * t - 1);
    x[i] = t;
    w[i] = 2.0 / ((1 - t * t) * dp * dp);
  }
}

double sphere_integral_oracle(const std::function<double(double, double, double)>& f,
                              const std::array<double, 3>& y, double r, int n_polar) {
  std::vector<double> gx, gw;
  gauss_nodes(n_polar, gx, gw);
  const int n_az = 2 * n_polar;
  double s = 0;
  for (int i = 0; i < n_polar; ++i) {
    const double ct = gx[i], st = std::sqrt(1 - ct * ct);
    double ring = 0;
    for (int k = 0; k < n_az; ++k) {
      const double ph = 2.0 * pi * k / n_az;
      ring += f(y[0] + r * st * std::cos(ph), y[1] + r * st * std::sin(ph),
                y[2] + r * ct);
    }
    s += gw[i] * ring * (2.0 * pi / n_az);
  }
  return s * r * r;
}

}  // namespace tt
