#pragma once

// Test-side helpers kept independent of the library so they can serve as
// oracles: high-order quadrature and mesh-independent random function draws.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace testsup {

// Deterministic uniform double in [lo, hi) built from the top 53 bits of the
// generator state; portable across standard library implementations.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Tensor 4x4 Gauss-Legendre rule applied per cell of an n x n partition of
// the unit square. Degree-7 exactness per cell; for the smooth integrands
// used as oracles the result is accurate far beyond the tolerances in play.
inline double gauss_integral_unit_square(
    const std::function<double(double, double)>& f, int n = 32) {
  static const double pts[4] = {-0.8611363115940526, -0.3399810435848563,
                                0.3399810435848563, 0.8611363115940526};
  static const double wts[4] = {0.3478548451374538, 0.6521451548625461,
                                0.6521451548625461, 0.3478548451374538};
  const double cell = 1.0 / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double cx = (i + 0.5) * cell;
      const double cy = (j + 0.5) * cell;
      double acc = 0.0;
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          const double x = cx + 0.5 * cell * pts[a];
          const double y = cy + 0.5 * cell * pts[b];
          acc += wts[a] * wts[b] * f(x, y);
        }
      }
      total += acc * cell * cell / 4.0;
    }
  }
  return total;
}

// Random trigonometric polynomial sum_{k,l<=K} c_kl sin(k pi x) sin(l pi y).
// Being a fixed function of (x, y) it is mesh-independent, so refinement
// comparisons evaluate the same object on every mesh.
inline std::function<double(double, double)> random_fourier(
    std::mt19937_64& rng, int K = 3, double amp = 1.0) {
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(K) * K);
  for (int k = 0; k < K * K; ++k) c.push_back(uniform(rng, -amp, amp));
  return [c, K](double x, double y) {
    double s = 0.0;
    int idx = 0;
    for (int k = 1; k <= K; ++k)
      for (int l = 1; l <= K; ++l)
        s += c[idx++] * std::sin(k * M_PI * x) * std::sin(l * M_PI * y);
    return s;
  };
}

}  // namespace testsup
