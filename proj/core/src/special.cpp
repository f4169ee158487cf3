#include "tatk/special.hpp"

#include <cmath>

namespace tatk {

void bessel_j_array(int kmax, double x, double* out) {
  require(kmax >= 0, "bessel_j_array: kmax must be >= 0");
  if (x < 0) throw std::invalid_argument("bessel_j_array: x must be >= 0");
  if (x < 1e-8) {
    // series: J_k(x) ~ (x/2)^k / k!
    out[0] = 1.0 - 0.25 * x * x;
    double term = 1.0;
    for (int k = 1; k <= kmax; ++k) {
      term *= 0.5 * x / k;
      out[k] = term;
    }
    return;
  }
  // start the downward recurrence well above max(kmax, x)
  const int start = kmax + 16 + static_cast<int>(x + 15.0 * std::cbrt(std::max(1.0, x)));
  double jp1 = 0.0, j = 1e-30;
  double sum = 0.0;  // normalization: J_0 + 2*sum_{even k>0} J_k = 1
  std::vector<double> buf(static_cast<std::size_t>(kmax) + 1, 0.0);
  for (int k = start; k >= 1; --k) {
    const double jm1 = (2.0 * k / x) * j - jp1;
    jp1 = j;
    j = jm1;
    if (!std::isfinite(j) || std::abs(j) > 1e250) {  // rescale to avoid overflow
      j *= 1e-250;
      jp1 *= 1e-250;
      sum *= 1e-250;
      for (auto& b : buf) b *= 1e-250;
    }
    const int idx = k - 1;
    if (idx <= kmax) buf[idx] = j;
    if (idx > 0 && idx % 2 == 0) sum += j;
  }
  sum = 2.0 * sum + j;
  for (int k = 0; k <= kmax; ++k) out[k] = buf[k] / sum;
}

void bessel_y_array(int kmax, double x, double* out) {
  require(kmax >= 0, "bessel_y_array: kmax must be >= 0");
  require(x > 0, "bessel_y_array: x must be > 0");
  out[0] = std::cyl_neumann(0.0, x);
  if (kmax == 0) return;
  out[1] = std::cyl_neumann(1.0, x);
  // saturate instead of overflowing: |Y_k| explodes for k >> x, and the
  // callers only ever divide by these values
  constexpr double cap = 1e290;
  for (int k = 1; k < kmax; ++k) {
    out[k + 1] = (2.0 * k / x) * out[k] - out[k - 1];
    if (std::abs(out[k + 1]) > cap) out[k + 1] = out[k + 1] > 0 ? cap : -cap;
  }
}

double bessel_j_zero(int m, int k) {
  require(m >= 0 && k >= 1, "bessel_j_zero: need m >= 0, k >= 1");
  // McMahon's expansion as the initial guess, then bracketed Newton
  const double mu = 4.0 * m * m;
  const double b = (k + 0.5 * m - 0.25) * pi;
  double x = b - (mu - 1) / (8 * b) -
             4 * (mu - 1) * (7 * mu - 31) / (3 * std::pow(8 * b, 3));
  if (m >= 2 && k <= 2) {
    // the expansion is poor for small k at higher order; walk up from a
    // conservative bracket instead
    double lo = m + 0.5, step = 0.5;
    int found = 0;
    double prev = std::cyl_bessel_j(m, lo);
    for (double t = lo + step; t < m + 200.0; t += step) {
      const double cur = std::cyl_bessel_j(m, t);
      if (prev * cur < 0) {
        ++found;
        if (found == k) {
          x = t - 0.5 * step;
          break;
        }
      }
      prev = cur;
    }
  }
  for (int it = 0; it < 60; ++it) {
    const double f = std::cyl_bessel_j(m, x);
    // J_m'(x) = J_{m-1}(x) - (m/x) J_m(x), with J_{-1} = -J_1
    const double jm1 = (m == 0) ? -std::cyl_bessel_j(1, x) : std::cyl_bessel_j(m - 1, x);
    const double fp = jm1 - (m / x) * f;
    const double dx = f / fp;
    x -= dx;
    if (std::abs(dx) < 1e-14 * x) break;
  }
  return x;
}

double sph_bessel_weight(int n, double z) {
  if (n == 2) return std::cyl_bessel_j(0.0, z);
  if (std::abs(z) < 1e-8) return 1.0 - z * z / 6.0;
  return std::sin(z) / z;
}

void gauss_legendre(int npts, std::vector<double>& nodes, std::vector<double>& weights) {
  require(npts >= 1, "gauss_legendre: need npts >= 1");
  nodes.assign(npts, 0.0);
  weights.assign(npts, 0.0);
  const int m = (npts + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(pi * (i + 0.75) / (npts + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < npts; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1);
      }
      pp = npts * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[npts - 1 - i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[npts - 1 - i] = weights[i];
  }
}

}  // namespace tatk
