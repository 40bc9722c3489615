#pragma once

// Test-only reference implementations, written independently of the
// library path they check: naive double-loop distance correlation and
// the closed-form Gaussian MI for a bivariate normal.

#include <torch/torch.h>

#include <cmath>
#include <vector>

namespace oracles {

// Naive O(n^2 d) empirical distance correlation over raw loops.
inline double naive_dcor(const torch::Tensor& w1_in, const torch::Tensor& w2_in) {
  auto w1 = w1_in.detach().to(torch::kFloat64).contiguous();
  auto w2 = w2_in.detach().to(torch::kFloat64).contiguous();
  const int64_t n = w1.size(0);
  auto dist = [n](const torch::Tensor& w) {
    const int64_t d = w.size(1);
    auto acc = w.accessor<double, 2>();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int64_t k = 0; k < d; ++k) {
          double diff = acc[i][k] - acc[j][k];
          s += diff * diff;
        }
        m[i][j] = std::sqrt(s);
      }
    return m;
  };
  auto center = [n](std::vector<std::vector<double>>& m) {
    std::vector<double> row(n, 0.0), col(n, 0.0);
    double grand = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) {
        row[i] += m[i][j];
        col[j] += m[i][j];
        grand += m[i][j];
      }
    for (int64_t i = 0; i < n; ++i) row[i] /= n;
    for (int64_t j = 0; j < n; ++j) col[j] /= n;
    grand /= static_cast<double>(n) * n;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) m[i][j] = m[i][j] - row[i] - col[j] + grand;
  };
  auto mean_prod = [n](const std::vector<std::vector<double>>& a,
                       const std::vector<std::vector<double>>& b) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j) s += a[i][j] * b[i][j];
    return s / (static_cast<double>(n) * n);
  };
  auto a = dist(w1);
  auto b = dist(w2);
  center(a);
  center(b);
  double vxy = std::max(0.0, mean_prod(a, b));
  double vxx = std::max(0.0, mean_prod(a, a));
  double vyy = std::max(0.0, mean_prod(b, b));
  if (vxx < 1e-12 || vyy < 1e-12) return 0.0;
  return std::sqrt(vxy) / std::sqrt(std::sqrt(vxx * vyy));
}

// Mutual information of a bivariate normal with correlation rho.
inline double bivariate_normal_mi(double rho) { return -0.5 * std::log(1.0 - rho * rho); }

}  // namespace oracles
