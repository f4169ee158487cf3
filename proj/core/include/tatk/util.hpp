#pragma once
// Small shared utilities: deterministic parallel loops, content hashing,
// numeric helpers used across the toolkit.

#include <cstdint>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace tatk {

inline constexpr double pi = 3.141592653589793238462643383279502884;

inline double sq(double x) { return x * x; }

// Runs f(i) for i in [begin, end). Work is split into contiguous chunks, one
// per thread; within a chunk iterations run in order, and different iterations
// must write disjoint outputs. That makes results independent of nthreads.
template <class F>
void parallel_for(std::int64_t begin, std::int64_t end, int nthreads, F&& f) {
  const std::int64_t count = end - begin;
  if (count <= 0) return;
  if (nthreads <= 1 || count == 1) {
    for (std::int64_t i = begin; i < end; ++i) f(i);
    return;
  }
  const int nt = static_cast<int>(std::min<std::int64_t>(nthreads, count));
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (int t = 0; t < nt; ++t) {
    const std::int64_t lo = begin + count * t / nt;
    const std::int64_t hi = begin + count * (t + 1) / nt;
    pool.emplace_back([lo, hi, &f] {
      for (std::int64_t i = lo; i < hi; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

// FNV-1a, used for manifests and cache keys. Stable across platforms.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), seed);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Relative L2 distance ||a-b|| / ||b||; falls back to absolute when ||b|| ~ 0.
inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("rel_l2: size mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += sq(a[i] - b[i]);
    den += sq(b[i]);
  }
  if (den == 0) return std::sqrt(num);
  return std::sqrt(num / den);
}

inline double l2_norm(const std::vector<double>& a) {
  double s = 0;
  for (double v : a) s += sq(v);
  return std::sqrt(s);
}

}  // namespace tatk
