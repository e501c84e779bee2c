#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinpeaks {

/// Square tridiagonal matrix. Row i reads sub[i]*v[i-1] + diag[i]*v[i] + sup[i]*v[i+1];
/// sub[0] and sup[n-1] are ignored.
struct Tridiagonal {
  std::vector<double> sub, diag, sup;

  explicit Tridiagonal(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}

  std::size_t size() const noexcept { return diag.size(); }

  std::vector<double> multiply(std::span<const double> v) const {
    const std::size_t n = size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * v[i];
      if (i > 0) s += sub[i] * v[i - 1];
      if (i + 1 < n) s += sup[i] * v[i + 1];
      out[i] = s;
    }
    return out;
  }

  /// Thomas elimination. Throws std::runtime_error on a nonpositive or non-finite pivot,
  /// which cannot happen for a strictly diagonally dominant matrix with positive diagonal.
  std::vector<double> solve(std::span<const double> rhs) const {
    const std::size_t n = size();
    if (rhs.size() != n) throw std::invalid_argument("tridiagonal solve: size mismatch");
    std::vector<double> c(n, 0.0), d(n, 0.0);
    double pivot = diag[0];
    if (!(pivot > 0.0) || !std::isfinite(pivot)) throw std::runtime_error("tridiagonal solve: bad pivot at row 0");
    c[0] = n > 1 ? sup[0] / pivot : 0.0;
    d[0] = rhs[0] / pivot;
    for (std::size_t i = 1; i < n; ++i) {
      pivot = diag[i] - sub[i] * c[i - 1];
      if (!(pivot > 0.0) || !std::isfinite(pivot)) {
        throw std::runtime_error("tridiagonal solve: bad pivot at row " + std::to_string(i));
      }
      c[i] = i + 1 < n ? sup[i] / pivot : 0.0;
      d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
  }
};

}  // namespace twinpeaks
