#pragma once

// Predictor-based disentanglement evaluation: kNN confusion of
// accuracy-above-chance, pairwise subspace dCor, Fréchet feature distance
// with a pluggable extractor, and the three-scenario swap-classifier
// protocol.

#include <torch/torch.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "latsep/common.hpp"
#include "latsep/dependence.hpp"
#include "latsep/encoder.hpp"
#include "json.hpp"

namespace latsep::metrics {

// Majority-class relative frequency on the evaluation split, in percent.
inline double chance_level(const torch::Tensor& labels) {
  if (labels.dim() != 1 || labels.size(0) == 0)
    throw data_error("chance_level: need a nonempty label vector");
  auto counts = torch::bincount(labels.to(torch::kInt64));
  return 100.0 * counts.max().item<int64_t>() / static_cast<double>(labels.size(0));
}

// Brute-force Euclidean kNN with deterministic tie-breaking: among tied
// vote counts the smallest class index wins.
inline torch::Tensor knn_predict(const torch::Tensor& train_x, const torch::Tensor& train_y,
                                 const torch::Tensor& test_x, int64_t k) {
  if (train_x.size(0) < k)
    throw config_error("knn: need at least k=" + std::to_string(k) + " training points");
  auto tx = train_x.to(torch::kFloat64);
  auto qx = test_x.to(torch::kFloat64);
  auto y = train_y.to(torch::kInt64);
  const int64_t classes = y.max().item<int64_t>() + 1;
  auto d = torch::cdist(qx, tx, 2.0, /*compute_mode=*/2);
  auto neighbors = std::get<1>(d.topk(k, /*dim=*/1, /*largest=*/false));
  auto votes = y.index_select(0, neighbors.flatten()).reshape({qx.size(0), k});
  auto counts = torch::zeros({qx.size(0), classes}, torch::kInt64);
  counts.scatter_add_(1, votes, torch::ones_like(votes));
  return counts.argmax(1);  // argmax picks the first (= smallest) tied class
}

inline double knn_accuracy(const torch::Tensor& train_x, const torch::Tensor& train_y,
                           const torch::Tensor& test_x, const torch::Tensor& test_y,
                           int64_t k) {
  auto pred = knn_predict(train_x, train_y, test_x, k);
  return 100.0 * (pred == test_y.to(torch::kInt64)).to(torch::kFloat64).mean().item<double>();
}

// Confusion matrix of accuracy-above-chance, in percentage points:
// rows = subspaces, columns = factors. kNN is fit on the training split
// and scored on the test split.
inline torch::Tensor knn_confusion(const std::vector<torch::Tensor>& train_embeddings,
                                   const std::vector<torch::Tensor>& train_labels,
                                   const std::vector<torch::Tensor>& test_embeddings,
                                   const std::vector<torch::Tensor>& test_labels,
                                   int64_t k = 30) {
  if (train_embeddings.empty() || train_labels.empty())
    throw config_error("knn_confusion: need at least one subspace and one factor");
  if (train_embeddings.size() != test_embeddings.size() ||
      train_labels.size() != test_labels.size())
    throw shape_error("knn_confusion: train/test structure mismatch");
  const auto n_sub = static_cast<int64_t>(train_embeddings.size());
  const auto n_fac = static_cast<int64_t>(train_labels.size());
  auto out = torch::zeros({n_sub, n_fac}, torch::kFloat64);
  for (int64_t s = 0; s < n_sub; ++s)
    for (int64_t f = 0; f < n_fac; ++f) {
      double acc = knn_accuracy(train_embeddings[s], train_labels[f], test_embeddings[s],
                                test_labels[f], k);
      out[s][f] = acc - chance_level(test_labels[f]);
    }
  return out;
}

inline constexpr int64_t kDcorSubsample = 4096;

// Symmetric K x K dCor matrix on the evaluation set; rows beyond 4096 are
// reduced to a fixed-seed subsample to bound the O(n^2) distance matrices.
inline torch::Tensor pairwise_dcor_report(const std::vector<torch::Tensor>& embeddings,
                                          uint64_t subsample_seed = 0) {
  const auto k = static_cast<int64_t>(embeddings.size());
  if (k < 1) throw config_error("pairwise_dcor_report: need at least one subspace");
  const auto n = embeddings[0].size(0);
  std::vector<torch::Tensor> views;
  if (n > kDcorSubsample) {
    auto gen = make_generator(subsample_seed);
    auto idx = torch::randperm(n, gen, torch::kInt64).slice(0, 0, kDcorSubsample);
    for (const auto& e : embeddings) views.push_back(e.index_select(0, idx));
  } else {
    views = embeddings;
  }
  auto out = torch::eye(k, torch::kFloat64);
  for (int64_t i = 0; i < k; ++i)
    for (int64_t j = 0; j < i; ++j) {
      auto v = dependence::distance_correlation(views[i], views[j]);
      out[i][j] = v.value;
      out[j][i] = v.value;
    }
  return out;
}

// --- Fréchet feature distance ---------------------------------------------

struct FeatureExtractor {
  std::function<torch::Tensor(const torch::Tensor&)> fn;
  std::string fingerprint;  // identity hash carried into every report
};

// Fixed random-weight convolutional extractor: cheap, deterministic, and
// sensitive to low-level statistics.
inline FeatureExtractor make_random_extractor(int64_t resolution, uint64_t seed = 17,
                                              int64_t feature_dim = 64) {
  torch::manual_seed(seed);
  auto net = encoder::EncoderNet(resolution, feature_dim,
                                 std::vector<int64_t>{8, 16, 32, 64});
  net->eval();
  double param_sum = 0.0;
  for (const auto& p : net->parameters()) param_sum += p.abs().sum().item<double>();
  FeatureExtractor out;
  out.fingerprint = "randconv-" + std::to_string(seed) + "-" +
                    hex64(fnv1a64(std::to_string(param_sum)));
  out.fn = [net](const torch::Tensor& images) mutable {
    torch::NoGradGuard no_grad;
    return net->forward(images);
  };
  return out;
}

namespace detail {

// symmetric PSD square root: eigendecomposition with negative eigenvalues
// clipped at 0
inline torch::Tensor sqrtm_psd(const torch::Tensor& m) {
  auto [evals, evecs] = torch::linalg_eigh(m);
  auto clipped = evals.clamp_min(0.0);
  return evecs.matmul(torch::diag(clipped.sqrt())).matmul(evecs.t());
}

}  // namespace detail

struct FrechetResult {
  double value = 0.0;
  bool jittered = false;          // rank-deficient covariance stabilized
  std::string extractor_fingerprint;
};

inline FrechetResult frechet_feature_distance(const torch::Tensor& real_images,
                                              const torch::Tensor& generated_images,
                                              const FeatureExtractor& extractor) {
  if (real_images.size(0) < 2 || generated_images.size(0) < 2)
    throw data_error("frechet_feature_distance: need >= 2 samples per side");
  auto fr = extractor.fn(real_images).to(torch::kFloat64);
  auto fg = extractor.fn(generated_images).to(torch::kFloat64);
  auto mu_r = fr.mean(0);
  auto mu_g = fg.mean(0);
  auto sigma_r = dependence::sample_covariance(fr);
  auto sigma_g = dependence::sample_covariance(fg);

  FrechetResult out;
  out.extractor_fingerprint = extractor.fingerprint;
  const double tiny = 1e-10;
  auto min_eig = [](const torch::Tensor& s) {
    return std::get<0>(torch::linalg_eigh(s)).min().item<double>();
  };
  if (min_eig(sigma_r) < tiny || min_eig(sigma_g) < tiny) {
    auto jitter = 1e-6 * torch::eye(sigma_r.size(0), torch::kFloat64);
    sigma_r = sigma_r + jitter;
    sigma_g = sigma_g + jitter;
    out.jittered = true;
  }
  // trace sqrt(S_r S_g) computed through the symmetric congruence
  // sqrt(A) S_r sqrt(A) with A = S_g
  auto root_g = detail::sqrtm_psd(sigma_g);
  auto cross = detail::sqrtm_psd(root_g.matmul(sigma_r).matmul(root_g));
  double value = (mu_r - mu_g).pow(2).sum().item<double>() +
                 (sigma_r.trace() + sigma_g.trace() - 2.0 * cross.trace()).item<double>();
  out.value = std::max(0.0, value);
  return out;
}

// --- swap-classifier protocol ----------------------------------------------

struct SwapEvalReport {
  double standard = 0.0;                 // scenario 1: reconstructions, original labels
  double swapped_new_labels = 0.0;       // scenario 2: swapped, reassigned labels
  double swapped_original_labels = 0.0;  // scenario 3: swapped, original labels
};

struct SwapClassifierConfig {
  int64_t epochs = 12;
  int64_t batch_size = 64;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  std::vector<int64_t> widths = {8, 16, 32, 64};
};

// images -> reconstructions
using ReconFn = std::function<torch::Tensor(const torch::Tensor&)>;
// (images, labels) -> (subspace-swapped reconstructions, reassigned labels)
using SwapFn =
    std::function<std::pair<torch::Tensor, torch::Tensor>(const torch::Tensor&,
                                                          const torch::Tensor&)>;

// Trains a small convolutional classifier on reconstructions of the
// training split, then scores the three scenarios on the test split.
inline SwapEvalReport swap_classifier_eval(const ReconFn& reconstruct, const SwapFn& swap,
                                           const torch::Tensor& train_images,
                                           const torch::Tensor& train_labels,
                                           const torch::Tensor& test_images,
                                           const torch::Tensor& test_labels,
                                           const SwapClassifierConfig& config) {
  if (train_images.size(0) != train_labels.size(0) ||
      test_images.size(0) != test_labels.size(0))
    throw shape_error("swap_classifier_eval: image/label count mismatch");
  torch::manual_seed(config.seed);
  const int64_t classes = train_labels.max().item<int64_t>() + 1;
  auto recon_train = reconstruct(train_images).detach();
  auto net = encoder::EncoderNet(recon_train.size(2), classes, config.widths);
  torch::optim::Adam adam(net->parameters(),
                          torch::optim::AdamOptions(config.learning_rate));
  auto gen = make_generator(config.seed);
  const int64_t n = recon_train.size(0);
  net->train();
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto perm = torch::randperm(n, gen, torch::kInt64);
    for (int64_t start = 0; start < n; start += config.batch_size) {
      auto idx = perm.slice(0, start, std::min(n, start + config.batch_size));
      auto logits = net->forward(recon_train.index_select(0, idx));
      auto loss = torch::nn::functional::cross_entropy(
          logits, train_labels.index_select(0, idx));
      adam.zero_grad();
      loss.backward();
      adam.step();
    }
  }
  net->eval();
  torch::NoGradGuard no_grad;
  auto accuracy = [&](const torch::Tensor& images, const torch::Tensor& labels) {
    auto pred = net->forward(images).argmax(1);
    return 100.0 * (pred == labels).to(torch::kFloat64).mean().item<double>();
  };
  SwapEvalReport report;
  report.standard = accuracy(reconstruct(test_images).detach(), test_labels);
  auto [swapped, new_labels] = swap(test_images, test_labels);
  report.swapped_new_labels = accuracy(swapped.detach(), new_labels);
  report.swapped_original_labels = accuracy(swapped.detach(), test_labels);
  return report;
}

// --- report serialization ---------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

struct DisentanglementReport {
  torch::Tensor confusion;      // subspaces x factors, percentage points
  torch::Tensor pairwise_dcor;  // K x K
  std::vector<std::string> subspace_names;
  std::vector<std::string> factor_names;
  int64_t knn_k = 30;
  std::string split = "test";
  uint64_t seed = 0;
  std::string protocol_note =
      "kNN fit on training-split embeddings, scored on the test split";
};

inline nlohmann::json matrix_to_json(const torch::Tensor& m) {
  auto x = m.to(torch::kFloat64).contiguous();
  nlohmann::json out = nlohmann::json::array();
  for (int64_t i = 0; i < x.size(0); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int64_t j = 0; j < x.size(1); ++j) row.push_back(x[i][j].item<double>());
    out.push_back(row);
  }
  return out;
}

inline torch::Tensor matrix_from_json(const nlohmann::json& j) {
  std::vector<double> flat;
  int64_t rows = j.size(), cols = rows ? j.at(0).size() : 0;
  for (const auto& row : j)
    for (const auto& v : row) flat.push_back(v.get<double>());
  return torch::tensor(flat, torch::kFloat64).reshape({rows, cols});
}

inline nlohmann::json report_to_json(const DisentanglementReport& r) {
  return nlohmann::json{
      {"schema_version", kReportSchemaVersion},
      {"code_fingerprint", code_fingerprint()},
      {"confusion", matrix_to_json(r.confusion)},
      {"pairwise_dcor", matrix_to_json(r.pairwise_dcor)},
      {"subspace_names", r.subspace_names},
      {"factor_names", r.factor_names},
      {"knn_k", r.knn_k},
      {"split", r.split},
      {"seed", r.seed},
      {"protocol_note", r.protocol_note},
  };
}

inline DisentanglementReport report_from_json(const nlohmann::json& j) {
  DisentanglementReport r;
  r.confusion = matrix_from_json(j.at("confusion"));
  r.pairwise_dcor = matrix_from_json(j.at("pairwise_dcor"));
  r.subspace_names = j.at("subspace_names").get<std::vector<std::string>>();
  r.factor_names = j.at("factor_names").get<std::vector<std::string>>();
  r.knn_k = j.at("knn_k").get<int64_t>();
  r.split = j.at("split").get<std::string>();
  r.seed = j.at("seed").get<uint64_t>();
  r.protocol_note = j.at("protocol_note").get<std::string>();
  return r;
}

}  // namespace latsep::metrics
