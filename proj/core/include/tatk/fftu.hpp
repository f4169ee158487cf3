#pragma once
// Thin FFTW wrappers. All plans use FFTW_ESTIMATE so planning is
// deterministic; plan creation is serialized internally (FFTW requirement).

#include <array>
#include <complex>

namespace tatk::fftu {

// Forward DFT, X_k = sum_j x_j exp(-2*pi*i*j*k/n).
void dft(const std::complex<double>* in, std::complex<double>* out, int n, bool inverse);

// In-place raised-cosine low-pass along a real row of n samples.
// cutoff_frac in (0,1] is the stop edge as a fraction of Nyquist; the cosine
// ramp occupies [cutoff*(1-rolloff), cutoff]; rolloff_frac = 0 is a brick wall.
void lowpass(double* row, int n, double cutoff_frac, double rolloff_frac);

// Fraction of spectral energy at frequencies strictly above cutoff_frac*Nyquist.
double highband_energy_fraction(const double* row, int n, double cutoff_frac);

// In-place DST-I on an ndim-D array of interior sizes m[0..ndim-1]
// (x fastest). Computes X_i = sum_j a_j * 2 sin(pi (i+1)(j+1)/(m+1)) per axis
// (FFTW RODFT00 convention, unnormalized).
void dst1(double* data, std::array<int, 3> m, int ndim);

// Discrete Hilbert transform of a real periodic sequence, convention
// H[x](s) = (1/pi) PV integral of x(r)/(s-r) dr; spectrally, multiplication
// by -i*sgn(k). Callers approximating the line transform must zero-pad.
void hilbert(const double* in, double* out, int n);

}  // namespace tatk::fftu
