#include "tatk/fftu.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <vector>

#include "tatk/util.hpp"

namespace tatk::fftu {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void dft(const std::complex<double>* in, std::complex<double>* out, int n, bool inverse) {
  std::vector<std::complex<double>> tmp(in, in + n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(tmp.data()),
                            reinterpret_cast<fftw_complex*>(out),
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  if (inverse) {
    const double s = 1.0 / n;
    for (int i = 0; i < n; ++i) out[i] *= s;
  }
}

namespace {

// window value at |frequency index| k for an n-sample row
double lowpass_window(int k, int n, double cutoff_frac, double rolloff_frac) {
  const double nyq = n / 2.0;
  const double edge = cutoff_frac * nyq;
  const double start = edge * (1.0 - rolloff_frac);
  const double f = k;
  if (f <= start) return 1.0;
  if (f >= edge) return 0.0;
  const double t = (f - start) / (edge - start);
  return 0.5 * (1.0 + std::cos(pi * t));
}

void halfcomplex_roundtrip(double* row, int n, std::vector<double>& spec) {
  spec.assign(row, row + n);
  fftw_plan fwd;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fwd = fftw_plan_r2r_1d(n, spec.data(), spec.data(), FFTW_R2HC, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(fwd);
  }
}

}  // namespace

void lowpass(double* row, int n, double cutoff_frac, double rolloff_frac) {
  require(cutoff_frac > 0 && cutoff_frac <= 1.0, "lowpass: cutoff must be in (0,1]");
  require(rolloff_frac >= 0 && rolloff_frac <= 1.0, "lowpass: rolloff must be in [0,1]");
  if (cutoff_frac == 1.0 && rolloff_frac == 0.0) return;  // exact identity
  std::vector<double> spec;
  halfcomplex_roundtrip(row, n, spec);
  // half-complex layout: r0, r1, ..., r_{n/2}, i_{(n+1)/2-1}, ..., i_1
  for (int k = 0; k <= n / 2; ++k) {
    const double w = lowpass_window(k, n, cutoff_frac, rolloff_frac);
    spec[k] *= w;
    if (k > 0 && k < (n + 1) / 2) spec[n - k] *= w;
  }
  fftw_plan bwd;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    bwd = fftw_plan_r2r_1d(n, spec.data(), spec.data(), FFTW_HC2R, FFTW_ESTIMATE);
  }
  fftw_execute(bwd);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(bwd);
  }
  const double s = 1.0 / n;
  for (int i = 0; i < n; ++i) row[i] = spec[i] * s;
}

double highband_energy_fraction(const double* row, int n, double cutoff_frac) {
  std::vector<double> spec, copy(row, row + n);
  halfcomplex_roundtrip(copy.data(), n, spec);
  const double edge = cutoff_frac * (n / 2.0);
  double total = 0, high = 0;
  for (int k = 0; k <= n / 2; ++k) {
    double e = sq(spec[k]);
    if (k > 0 && k < (n + 1) / 2) e += sq(spec[n - k]);
    total += e;
    if (k > edge) high += e;
  }
  return total > 0 ? high / total : 0.0;
}

void hilbert(const double* in, double* out, int n) {
  require(n >= 4, "hilbert: need at least 4 samples");
  std::vector<double> spec(in, in + n);
  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fwd = fftw_plan_r2r_1d(n, spec.data(), spec.data(), FFTW_R2HC, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  // Multiply by -i*sgn(k). In half-complex layout X_k = (re, im) lives at
  // (spec[k], spec[n-k]); -i*(re + i*im) = im - i*re, so (re, im) <- (im, -re).
  // DC and (for even n) Nyquist bins carry no sign and are zeroed.
  spec[0] = 0;
  if (n % 2 == 0) spec[n / 2] = 0;
  for (int k = 1; k < (n + 1) / 2; ++k) {
    const double re = spec[k], im = spec[n - k];
    spec[k] = im;
    spec[n - k] = -re;
  }
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    bwd = fftw_plan_r2r_1d(n, spec.data(), spec.data(), FFTW_HC2R, FFTW_ESTIMATE);
  }
  fftw_execute(bwd);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  const double s = 1.0 / n;
  for (int i = 0; i < n; ++i) out[i] = spec[i] * s;
}

void dst1(double* data, std::array<int, 3> m, int ndim) {
  fftw_r2r_kind kinds[3] = {FFTW_RODFT00, FFTW_RODFT00, FFTW_RODFT00};
  // FFTW wants slowest-varying dimension first; our x axis is fastest
  int dims[3];
  for (int a = 0; a < ndim; ++a) dims[a] = m[ndim - 1 - a];
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_r2r(ndim, dims, data, data, kinds, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
}

}  // namespace tatk::fftu
