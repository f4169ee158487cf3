#pragma once
// Bessel helpers on top of the C++17 special math functions: whole-order
// arrays by recurrence (hot paths), zeros by bracketed Newton, spherical
// Bessel weights, Gauss-Legendre rules.

#include <vector>

#include "tatk/util.hpp"

namespace tatk {

// J_0(x) .. J_kmax(x) via Miller's downward recurrence (stable for all k);
// falls back to the power series near x = 0.
void bessel_j_array(int kmax, double x, double* out);

// Y_0(x) .. Y_kmax(x) via upward recurrence (stable direction for Y), x > 0.
void bessel_y_array(int kmax, double x, double* out);

// k-th positive zero of J_m (k = 1, 2, ...).
double bessel_j_zero(int m, int k);

// j_{n/2-1}-type radial weight normalized to 1 at z = 0:
// n = 2 -> J_0(z); n = 3 -> sin(z)/z.
double sph_bessel_weight(int n, double z);

// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int npts, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace tatk
