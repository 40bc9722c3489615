#pragma once

// Differentiable dependence measures between sample batches: empirical
// distance covariance/correlation, Gaussian mutual information variants,
// and the mean pairwise-dCor disentanglement loss. All computations are
// promoted to float64; double centering is cancellation-prone in float32.

#include <torch/torch.h>

#include <vector>

#include "latsep/common.hpp"

namespace latsep::dependence {

inline constexpr double kDegenerateTol = 1e-12;

enum class Measure { dcor, gmi, cgmi };

struct DependenceValue {
  double value = 0.0;
  bool degenerate = false;
};

inline void check_batch(const torch::Tensor& w, const char* name) {
  if (w.dim() != 2) throw shape_error(std::string(name) + ": expected an n x d matrix");
  if (w.size(0) < 2) throw data_error(std::string(name) + ": need at least 2 samples");
  if (!w.isfinite().all().item<bool>())
    throw data_error(std::string(name) + ": non-finite entries");
}

inline void check_pair(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_batch(w1, "w1");
  check_batch(w2, "w2");
  if (w1.size(0) != w2.size(0))
    throw shape_error("sample counts differ: " + std::to_string(w1.size(0)) + " vs " +
                      std::to_string(w2.size(0)));
}

// Pairwise Euclidean distances with a zero subgradient at coincident pairs.
// The where-gated sqrt keeps the backward pass finite when d_ij = 0.
inline torch::Tensor pairwise_distances(const torch::Tensor& batch) {
  auto x = batch.to(torch::kFloat64);
  if (x.requires_grad()) {
    auto diff = x.unsqueeze(0) - x.unsqueeze(1);
    auto sq = diff.pow(2).sum(-1);
    auto pos = sq > 0;
    auto safe = torch::where(pos, sq, torch::ones_like(sq));
    return torch::where(pos, safe.sqrt(), torch::zeros_like(sq));
  }
  // evaluation path: cdist avoids the n x n x d intermediate;
  // compute_mode 2 = exact euclidean (no matmul shortcut)
  return torch::cdist(x, x, 2.0, /*compute_mode=*/2);
}

inline torch::Tensor double_center(const torch::Tensor& dist) {
  auto row_mean = dist.mean(1, /*keepdim=*/true);
  auto col_mean = dist.mean(0, /*keepdim=*/true);
  auto grand_mean = dist.mean();
  return dist - row_mean - col_mean + grand_mean;
}

inline torch::Tensor centered_distance_matrix(const torch::Tensor& batch) {
  check_batch(batch, "batch");
  return double_center(pairwise_distances(batch));
}

// dCov^2 of two already-centered matrices, clamped at 0 against
// floating-point negativity.
inline torch::Tensor dcov_squared(const torch::Tensor& a, const torch::Tensor& b) {
  return (a * b).mean().clamp_min(0.0);
}

// Differentiable dCov. Returns a detached zero when the squared form is
// below tolerance (sqrt has an infinite derivative at 0).
inline torch::Tensor distance_covariance_t(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  auto a = centered_distance_matrix(w1);
  auto b = centered_distance_matrix(w2);
  auto v2 = dcov_squared(a, b);
  if (v2.item<double>() < kDegenerateTol)
    return torch::zeros({}, torch::kFloat64);
  return v2.sqrt();
}

inline DependenceValue distance_covariance(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  auto a = centered_distance_matrix(w1.detach());
  auto b = centered_distance_matrix(w2.detach());
  auto self1 = dcov_squared(a, a).item<double>();
  auto self2 = dcov_squared(b, b).item<double>();
  auto v2 = dcov_squared(a, b).item<double>();
  DependenceValue out;
  out.degenerate = self1 < kDegenerateTol || self2 < kDegenerateTol;
  out.value = out.degenerate ? 0.0 : std::sqrt(v2);
  return out;
}

// Empirical distance correlation, differentiable for loss use. A constant
// batch (degenerate denominator) contributes a detached zero.
inline torch::Tensor distance_correlation_t(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  auto a = centered_distance_matrix(w1);
  auto b = centered_distance_matrix(w2);
  auto self1 = dcov_squared(a, a);
  auto self2 = dcov_squared(b, b);
  if (self1.item<double>() < kDegenerateTol || self2.item<double>() < kDegenerateTol)
    return torch::zeros({}, torch::kFloat64);
  auto cross = dcov_squared(a, b);
  if (cross.item<double>() < kDegenerateTol)
    return torch::zeros({}, torch::kFloat64);
  return cross.sqrt() / (self1.sqrt() * self2.sqrt()).sqrt();
}

inline DependenceValue distance_correlation(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  auto a = centered_distance_matrix(w1.detach());
  auto b = centered_distance_matrix(w2.detach());
  auto self1 = dcov_squared(a, a).item<double>();
  auto self2 = dcov_squared(b, b).item<double>();
  DependenceValue out;
  if (self1 < kDegenerateTol || self2 < kDegenerateTol) {
    out.degenerate = true;
    return out;
  }
  auto cross = dcov_squared(a, b).item<double>();
  out.value = std::sqrt(cross) / std::sqrt(std::sqrt(self1 * self2));
  return out;
}

// Mean dCor over all K(K-1)/2 unordered subspace pairs.
inline torch::Tensor disentanglement_loss(const std::vector<torch::Tensor>& subspaces) {
  const auto k = static_cast<int64_t>(subspaces.size());
  if (k < 2) throw config_error("disentanglement_loss: need at least 2 subspaces");
  const auto n = subspaces[0].size(0);
  for (const auto& w : subspaces)
    if (w.size(0) != n) throw shape_error("disentanglement_loss: sample counts differ");
  auto total = torch::zeros({}, torch::kFloat64);
  for (int64_t i = 0; i < k; ++i)
    for (int64_t j = 0; j < i; ++j)
      total = total + distance_correlation_t(subspaces[i], subspaces[j]);
  return total * (2.0 / (static_cast<double>(k) * (k - 1)));
}

// Unbiased sample covariance (divisor n-1) of a centered joint batch.
inline torch::Tensor sample_covariance(const torch::Tensor& x) {
  auto centered = x - x.mean(0, /*keepdim=*/true);
  return centered.t().matmul(centered) / static_cast<double>(x.size(0) - 1);
}

// GMI(w1, w2) = 1/2 log(det S1 det S2 / det S_joint), clamped below at 0.
inline torch::Tensor gaussian_mi_t(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  auto x1 = w1.to(torch::kFloat64);
  auto x2 = w2.to(torch::kFloat64);
  const auto n = x1.size(0);
  const auto d = x1.size(1) + x2.size(1);
  if (n <= d)
    throw data_error("gaussian_mi: need n > d1 + d2 samples, got n=" + std::to_string(n));
  auto joint = torch::cat({x1, x2}, 1);
  auto sj = sample_covariance(joint);
  auto s1 = sj.slice(0, 0, x1.size(1)).slice(1, 0, x1.size(1));
  auto s2 = sj.slice(0, x1.size(1), d).slice(1, x1.size(1), d);
  auto [sign_j, logdet_j] = torch::linalg_slogdet(sj);
  if (sign_j.item<double>() <= 0.0 || !std::isfinite(logdet_j.item<double>()))
    throw singularity_error("gaussian_mi: singular joint covariance");
  auto [sign_1, logdet_1] = torch::linalg_slogdet(s1);
  auto [sign_2, logdet_2] = torch::linalg_slogdet(s2);
  if (sign_1.item<double>() <= 0.0 || sign_2.item<double>() <= 0.0)
    throw singularity_error("gaussian_mi: singular marginal covariance");
  return (0.5 * (logdet_1 + logdet_2 - logdet_j)).clamp_min(0.0);
}

inline double gaussian_mi(const torch::Tensor& w1, const torch::Tensor& w2) {
  return gaussian_mi_t(w1.detach(), w2.detach()).item<double>();
}

// C-GMI over the per-sample feature sums. When cov^2 approaches
// var1*var2 the denominator is clamped to a tiny positive fraction,
// capping the measure at a large finite value instead of diverging.
inline torch::Tensor collapsed_gaussian_mi_t(const torch::Tensor& w1, const torch::Tensor& w2) {
  check_pair(w1, w2);
  if (w1.size(0) < 3) throw data_error("collapsed_gaussian_mi: need at least 3 samples");
  auto s1 = w1.to(torch::kFloat64).sum(1);
  auto s2 = w2.to(torch::kFloat64).sum(1);
  auto v1 = s1.var(/*unbiased=*/true);
  auto v2 = s2.var(/*unbiased=*/true);
  if (v1.item<double>() < kDegenerateTol || v2.item<double>() < kDegenerateTol)
    throw degenerate_error("collapsed_gaussian_mi: zero variance of a collapsed variable");
  auto c = ((s1 - s1.mean()) * (s2 - s2.mean())).sum() / static_cast<double>(s1.size(0) - 1);
  auto prod = v1 * v2;
  auto denom = (prod - c * c).clamp_min(1e-12 * prod.item<double>());
  return (0.5 * torch::log(prod / denom)).clamp_min(0.0);
}

inline double collapsed_gaussian_mi(const torch::Tensor& w1, const torch::Tensor& w2) {
  return collapsed_gaussian_mi_t(w1.detach(), w2.detach()).item<double>();
}

inline torch::Tensor measure_t(Measure m, const torch::Tensor& w1, const torch::Tensor& w2) {
  switch (m) {
    case Measure::dcor: return distance_correlation_t(w1, w2);
    case Measure::gmi: return gaussian_mi_t(w1, w2);
    case Measure::cgmi: return collapsed_gaussian_mi_t(w1, w2);
  }
  throw config_error("unknown measure");
}

struct GradientPair {
  torch::Tensor g1;
  torch::Tensor g2;
  bool degenerate = false;
};

// Autograd gradient of a measure w.r.t. both batches. A degenerate value
// (detached constant) yields zero gradients and sets the flag.
inline GradientPair dependence_gradient(Measure m, const torch::Tensor& w1,
                                        const torch::Tensor& w2) {
  auto x1 = w1.detach().to(torch::kFloat64).clone().requires_grad_(true);
  auto x2 = w2.detach().to(torch::kFloat64).clone().requires_grad_(true);
  auto value = measure_t(m, x1, x2);
  GradientPair out;
  if (!value.requires_grad()) {
    out.g1 = torch::zeros_like(x1).detach();
    out.g2 = torch::zeros_like(x2).detach();
    out.degenerate = true;
    return out;
  }
  value.backward();
  out.g1 = x1.grad().defined() ? x1.grad() : torch::zeros_like(x1).detach();
  out.g2 = x2.grad().defined() ? x2.grad() : torch::zeros_like(x2).detach();
  return out;
}

}  // namespace latsep::dependence
