#pragma once

// Test-side reference implementations. Nothing here calls into the library's numerics,
// so agreement with the library is an independent check.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense zeros(std::size_t n) { return Dense(n, std::vector<double>(n, 0.0)); }

// Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(Dense a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (a[piv][col] == 0.0) throw std::runtime_error("singular");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

inline Dense transpose(const Dense& a) {
  Dense t = zeros(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) t[j][i] = a[i][j];
  }
  return t;
}

// HJB generator written straight from its definition: row i has y_i at i-1, z_i at i, x_i at i+1.
inline Dense hjb_generator(const std::vector<double>& mu, double sigma, double dk) {
  const std::size_t n = mu.size();
  Dense g = zeros(n);
  const double d = sigma * sigma / 2.0 / (dk * dk);
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::max(mu[i], 0.0) / dk + d;
    double y = -std::min(mu[i], 0.0) / dk + d;
    if (i == 0) y = 0.0;
    if (i + 1 == n) x = 0.0;
    if (i > 0) g[i][i - 1] = y;
    if (i + 1 < n) g[i][i + 1] = x;
    g[i][i] = -(x + y);
  }
  return g;
}

// Mean absolute difference over twice the mean, O(N^2).
inline double gini_brute(const std::vector<double>& w, const std::vector<double>& k) {
  double mass = 0.0, mean = 0.0, mad = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    mass += w[i];
    mean += w[i] * k[i];
  }
  mean /= mass;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t j = 0; j < w.size(); ++j) mad += w[i] * w[j] * std::abs(k[i] - k[j]);
  }
  mad /= mass * mass;
  return mad / (2.0 * mean);
}

// Frozen high-precision values (30-digit mpmath evaluations).
inline constexpr double kPow_11_5_033 = 2.23887727046343532;        // 11.5^0.33
inline constexpr double kDetSteadyStateL = 10.1180858036985020;     // (0.33/0.07)^(1/0.67)
inline constexpr double kDetSteadyStateH = 14.1169269845573665;     // (0.33*1.25/0.07)^(1/0.67)

inline constexpr double kZeroDriftConsumptionH50 = 3.54537913915149017;  // 1.25*50^0.33 - 0.02*50

}  // namespace oracle
