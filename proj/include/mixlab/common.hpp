// Shared small utilities: fixed-width points for 1D/2D phase spaces,
// seed-derived RNG streams, deterministic reductions (independent of thread
// count), and least-squares helpers used by the various fit reports.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixlab {

using cplx = std::complex<double>;

// Point in a 1- or 2-dimensional domain.  dim is carried by the owning
// system; unused coordinates stay zero so Pt can be passed by value freely.
struct Pt {
  std::array<double, 2> x{0.0, 0.0};

  double& operator[](int i) { return x[i]; }
  double operator[](int i) const { return x[i]; }
};

inline Pt pt1(double a) { return Pt{{a, 0.0}}; }
inline Pt pt2(double a, double b) { return Pt{{a, b}}; }

inline double dist_inf(const Pt& a, const Pt& b, int dim) {
  double m = 0.0;
  for (int d = 0; d < dim; ++d) m = std::max(m, std::abs(a[d] - b[d]));
  return m;
}

inline double dist_euclid(const Pt& a, const Pt& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

// SplitMix64, used to derive independent substream seeds from (seed, index)
// pairs.  Parallel loops draw one stream per element so results do not
// depend on scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4a2b59e3771ULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (0x100000001b3ULL * (stream + 1))));
}

// Deterministic sum: accumulate fixed-size blocks in parallel, then combine
// serially in index order.  The result is bitwise independent of the number
// of threads.
template <class T>
inline T det_sum_impl(std::span<const T> v) {
  constexpr std::size_t kBlock = 4096;
  const std::size_t nb = (v.size() + kBlock - 1) / kBlock;
  std::vector<T> partial(nb, T{});
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
    T s{};
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(lo + kBlock, v.size());
    for (std::size_t i = lo; i < hi; ++i) s += v[i];
    partial[static_cast<std::size_t>(b)] = s;
  }
  T total{};
  for (const T& s : partial) total += s;
  return total;
}

inline double det_sum(std::span<const double> v) { return det_sum_impl<double>(v); }
inline cplx det_sum(std::span<const cplx> v) { return det_sum_impl<cplx>(v); }

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int n = 0;
};

// Least squares y ~ intercept + slope*x.  r2 is 1 - SS_res/SS_tot, with
// r2 = 1 when SS_tot vanishes (constant data fitted exactly).
inline LineFit fit_line(std::span<const double> xs, std::span<const double> ys) {
  LineFit f;
  f.n = static_cast<int>(xs.size());
  if (xs.size() != ys.size() || xs.size() < 2) return f;
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) { sx += xs[i]; sy += ys[i]; }
  const double mx = sx / xs.size(), my = sy / ys.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx <= 0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssres = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (f.intercept + f.slope * xs[i]);
    ssres += e * e;
  }
  f.r2 = (syy > 0) ? 1.0 - ssres / syy : 1.0;
  return f;
}

struct check_error : std::runtime_error {
  explicit check_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw check_error(what);
}

} // namespace mixlab
