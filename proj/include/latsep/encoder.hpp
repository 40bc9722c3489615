#pragma once

// Image encoder with a partitioned latent space and per-subspace linear
// classification heads. Trained with mean cross-entropy over the heads
// plus a weighted mean-pairwise-dCor term over the subspace slices. The
// heads are pure linear readouts: the dCor term depends only on the
// encoder, so they never receive its gradients.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "latsep/common.hpp"
#include "latsep/dependence.hpp"
#include "json.hpp"

namespace latsep::encoder {

struct SubspaceLayout {
  std::vector<std::string> names;
  std::vector<int64_t> dims;

  int64_t total() const {
    int64_t t = 0;
    for (auto d : dims) t += d;
    return t;
  }
  size_t count() const { return dims.size(); }
  void validate() const {
    if (dims.empty() || names.size() != dims.size())
      throw config_error("layout: need matching non-empty names/dims");
    for (auto d : dims)
      if (d < 1) throw config_error("layout: subspace dims must be >= 1");
  }
  // slice of the latent matrix belonging to subspace k
  torch::Tensor slice(const torch::Tensor& latents, size_t k) const {
    int64_t start = 0;
    for (size_t i = 0; i < k; ++i) start += dims[i];
    return latents.slice(1, start, start + dims[k]);
  }
  std::vector<torch::Tensor> slices(const torch::Tensor& latents) const {
    std::vector<torch::Tensor> out;
    for (size_t k = 0; k < count(); ++k) out.push_back(slice(latents, k));
    return out;
  }
};

struct ResidualBlockImpl : torch::nn::Module {
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  explicit ResidualBlockImpl(int64_t channels) {
    conv1 = register_module(
        "conv1", torch::nn::Conv2d(
                     torch::nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
    bn1 = register_module("bn1", torch::nn::BatchNorm2d(channels));
    conv2 = register_module(
        "conv2", torch::nn::Conv2d(
                     torch::nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
    bn2 = register_module("bn2", torch::nn::BatchNorm2d(channels));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = torch::relu(bn1->forward(conv1->forward(x)));
    return torch::relu(x + bn2->forward(conv2->forward(h)));
  }
};
TORCH_MODULE(ResidualBlock);

// Four downsampling stages, each a strided conv plus a residual block,
// then global average pooling, rectification, and an affine map to R^d.
struct EncoderNetImpl : torch::nn::Module {
  torch::nn::Conv2d stem{nullptr};
  torch::nn::Sequential stages{nullptr};
  torch::nn::Linear project{nullptr};
  int64_t resolution = 0;
  int64_t out_dim = 0;

  EncoderNetImpl(int64_t resolution_, int64_t out_dim_, std::vector<int64_t> widths = {})
      : resolution(resolution_), out_dim(out_dim_) {
    if (widths.empty()) widths = {16, 32, 64, 128};
    if (widths.size() != 4) throw config_error("encoder: expected 4 stage widths");
    stem = register_module(
        "stem", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, widths[0], 3).padding(1)));
    torch::nn::Sequential seq;
    int64_t in = widths[0];
    for (int64_t w : widths) {
      seq->push_back(torch::nn::Conv2d(
          torch::nn::Conv2dOptions(in, w, 3).stride(2).padding(1).bias(false)));
      seq->push_back(torch::nn::BatchNorm2d(w));
      seq->push_back(torch::nn::ReLU());
      seq->push_back(ResidualBlock(w));
      in = w;
    }
    stages = register_module("stages", seq);
    project = register_module("project", torch::nn::Linear(in, out_dim));
  }

  torch::Tensor forward(const torch::Tensor& images) {
    if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != resolution ||
        images.size(3) != resolution)
      throw shape_error("encoder: expected n x 3 x " + std::to_string(resolution) + " x " +
                        std::to_string(resolution) + " images");
    auto h = stages->forward(stem->forward(images));
    h = torch::adaptive_avg_pool2d(h, {1, 1}).flatten(1);
    return project->forward(torch::relu(h));
  }
};
TORCH_MODULE(EncoderNet);

struct ClassifierHeads {
  std::vector<torch::nn::Linear> heads;  // one per supervised subspace

  static ClassifierHeads make(const SubspaceLayout& layout,
                              const std::vector<int64_t>& class_counts) {
    layout.validate();
    if (class_counts.size() > layout.count())
      throw config_error("heads: more class counts than subspaces");
    ClassifierHeads out;
    for (size_t k = 0; k < class_counts.size(); ++k) {
      if (class_counts[k] < 2) throw config_error("heads: need >= 2 classes");
      out.heads.emplace_back(torch::nn::Linear(layout.dims[k], class_counts[k]));
    }
    return out;
  }
  std::vector<torch::Tensor> parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& h : heads)
      for (const auto& p : h->parameters()) out.push_back(p);
    return out;
  }
};

// Eq-style mean over supervised subspaces of softmax cross-entropy.
inline torch::Tensor classification_loss(const ClassifierHeads& heads,
                                         const SubspaceLayout& layout,
                                         const torch::Tensor& latents,
                                         const std::vector<torch::Tensor>& labels) {
  if (labels.size() != heads.heads.size())
    throw config_error("classification_loss: one label vector per supervised subspace");
  if (labels.empty()) throw config_error("classification_loss: no supervised subspaces");
  auto total = torch::zeros({}, latents.options());
  for (size_t k = 0; k < heads.heads.size(); ++k) {
    const auto& y = labels[k];
    if (y.dim() != 1 || y.size(0) != latents.size(0))
      throw shape_error("classification_loss: label shape mismatch");
    auto head = heads.heads[k];  // holder copy shares the module
    int64_t classes = head->weight.size(0);
    if ((y < 0).any().item<bool>() || (y >= classes).any().item<bool>())
      throw data_error("classification_loss: label out of range for subspace " +
                       std::to_string(k));
    auto logits = head->forward(layout.slice(latents, k));
    total = total + torch::nn::functional::cross_entropy(logits, y);
  }
  return total / static_cast<double>(heads.heads.size());
}

struct LossBreakdown {
  torch::Tensor total;
  torch::Tensor ce;
  torch::Tensor dc;
};

struct EncoderTrainConfig {
  double lambda_dc = 0.5;
  int64_t batch_size = 256;
  double learning_rate = 1e-3;
  double weight_decay = 8e-3;
  int64_t epochs = 30;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  uint64_t seed = 0;

  void validate() const {
    if (lambda_dc < 0) throw config_error("encoder config: lambda_dc must be >= 0");
    if (batch_size < 4) throw config_error("encoder config: batch_size too small");
    if (epochs < 1) throw config_error("encoder config: epochs must be >= 1");
  }
};

// L_CE + lambda_DC * L_DC, with L_DC the mean pairwise dCor over all
// subspace slices (supervised or not). Single-subspace layouts have no
// pairs and contribute zero.
inline LossBreakdown total_encoder_loss(const ClassifierHeads& heads,
                                        const SubspaceLayout& layout,
                                        const torch::Tensor& latents,
                                        const std::vector<torch::Tensor>& labels,
                                        const EncoderTrainConfig& config) {
  LossBreakdown out;
  out.ce = classification_loss(heads, layout, latents, labels);
  out.dc = layout.count() >= 2
               ? dependence::disentanglement_loss(layout.slices(latents)).to(latents.dtype())
               : torch::zeros({}, latents.options());
  out.total = out.ce + config.lambda_dc * out.dc;
  return out;
}

struct EncoderDataset {
  torch::Tensor images;                // n x 3 x H x W
  std::vector<torch::Tensor> labels;   // one int64 vector per supervised subspace
};

struct EpochLog {
  int64_t epoch = 0;
  double train_ce = 0, train_dc = 0, train_total = 0;
  double val_ce = 0, val_dc = 0, val_total = 0;
  std::vector<double> val_accuracy;  // per supervised subspace
};

struct ModelBundle {
  EncoderNet net{nullptr};
  ClassifierHeads heads;
  SubspaceLayout layout;
  std::vector<int64_t> class_counts;
  EncoderTrainConfig config;
  std::vector<EpochLog> log;
  int64_t best_epoch = -1;
};

inline torch::Tensor encode(const ModelBundle& bundle, const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  auto net = bundle.net;  // holder copy shares the module
  net->eval();
  return net->forward(images);
}

namespace detail {

inline void check_dataset(const EncoderDataset& d, const ClassifierHeads& heads) {
  if (d.images.dim() != 4) throw shape_error("encoder dataset: images must be n x c x h x w");
  if (d.labels.size() != heads.heads.size())
    throw config_error("encoder dataset: one label vector per supervised subspace");
}

struct EvalResult {
  double ce = 0, dc = 0, total = 0;
  std::vector<double> accuracy;
};

inline EvalResult evaluate(EncoderNet& net, const ClassifierHeads& heads,
                           const SubspaceLayout& layout, const EncoderDataset& data,
                           const EncoderTrainConfig& config) {
  torch::NoGradGuard no_grad;
  net->eval();
  auto latents = net->forward(data.images);
  auto breakdown = total_encoder_loss(heads, layout, latents, data.labels, config);
  EvalResult out;
  out.ce = breakdown.ce.item<double>();
  out.dc = breakdown.dc.item<double>();
  out.total = breakdown.total.item<double>();
  for (size_t k = 0; k < heads.heads.size(); ++k) {
    auto head = heads.heads[k];
    auto pred = head->forward(layout.slice(latents, k)).argmax(1);
    out.accuracy.push_back(
        (pred == data.labels[k]).to(torch::kFloat64).mean().item<double>());
  }
  return out;
}

inline std::vector<torch::Tensor> clone_parameters(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

inline void restore_parameters(const std::vector<torch::Tensor>& params,
                               const std::vector<torch::Tensor>& saved) {
  torch::NoGradGuard no_grad;
  for (size_t i = 0; i < params.size(); ++i) params[i].copy_(saved[i]);
}

}  // namespace detail

// Adam training with early stopping on total validation loss: the
// returned bundle carries the parameters of the best validation epoch.
inline ModelBundle train_encoder(const EncoderDataset& train, const EncoderDataset& val,
                                 const SubspaceLayout& layout,
                                 const std::vector<int64_t>& class_counts,
                                 const EncoderTrainConfig& config,
                                 std::vector<int64_t> widths = {},
                                 const ModelBundle* resume_from = nullptr) {
  layout.validate();
  config.validate();
  torch::manual_seed(config.seed);

  ModelBundle bundle;
  bundle.layout = layout;
  bundle.class_counts = class_counts;
  bundle.config = config;
  bundle.net = EncoderNet(train.images.size(2), layout.total(), widths);
  bundle.heads = ClassifierHeads::make(layout, class_counts);
  detail::check_dataset(train, bundle.heads);
  detail::check_dataset(val, bundle.heads);

  std::vector<torch::Tensor> params = bundle.net->parameters();
  for (const auto& p : bundle.heads.parameters()) params.push_back(p);
  // normalization running stats must travel with the checkpointed weights
  std::vector<torch::Tensor> state = params;
  for (const auto& b : bundle.net->buffers()) state.push_back(b);
  auto opts = torch::optim::AdamOptions(config.learning_rate)
                  .betas({config.beta1, config.beta2})
                  .eps(config.epsilon)
                  .weight_decay(config.weight_decay);
  torch::optim::Adam adam(params, opts);

  // warm start: adopt the previous run's weights and continue its epoch
  // counter (optimizer moments restart)
  int64_t epoch_offset = 0;
  if (resume_from) {
    std::vector<torch::Tensor> prev = resume_from->net->parameters();
    for (const auto& p : resume_from->heads.parameters()) prev.push_back(p);
    for (const auto& b : resume_from->net->buffers()) prev.push_back(b);
    detail::restore_parameters(state, detail::clone_parameters(prev));
    bundle.log = resume_from->log;
    bundle.best_epoch = resume_from->best_epoch;
    epoch_offset = static_cast<int64_t>(resume_from->log.size());
  }

  const int64_t n = train.images.size(0);
  auto gen = make_generator(config.seed);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<torch::Tensor> best_params;

  for (int64_t epoch = epoch_offset; epoch < epoch_offset + config.epochs; ++epoch) {
    bundle.net->train();
    auto perm = torch::randperm(n, gen, torch::kInt64);
    double ce_sum = 0, dc_sum = 0, total_sum = 0;
    int64_t batches = 0;
    for (int64_t start = 0; start + 4 <= n; start += config.batch_size) {
      auto idx = perm.slice(0, start, std::min(n, start + config.batch_size));
      auto images = train.images.index_select(0, idx);
      std::vector<torch::Tensor> labels;
      for (const auto& y : train.labels) labels.push_back(y.index_select(0, idx));
      LossBreakdown breakdown;
      try {
        auto latents = bundle.net->forward(images);
        breakdown = total_encoder_loss(bundle.heads, layout, latents, labels, config);
      } catch (const data_error& e) {
        throw numeric_error("train_encoder: aborted at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batches) +
                            " (lambda_dc=" + std::to_string(config.lambda_dc) +
                            "): " + e.what());
      }
      double loss_value = breakdown.total.item<double>();
      if (!std::isfinite(loss_value))
        throw numeric_error("train_encoder: non-finite loss at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batches) +
                            " (lambda_dc=" + std::to_string(config.lambda_dc) + ")");
      adam.zero_grad();
      breakdown.total.backward();
      adam.step();
      ce_sum += breakdown.ce.item<double>();
      dc_sum += breakdown.dc.item<double>();
      total_sum += loss_value;
      ++batches;
    }
    auto val_eval = detail::evaluate(bundle.net, bundle.heads, layout, val, config);
    EpochLog log;
    log.epoch = epoch;
    log.train_ce = ce_sum / batches;
    log.train_dc = dc_sum / batches;
    log.train_total = total_sum / batches;
    log.val_ce = val_eval.ce;
    log.val_dc = val_eval.dc;
    log.val_total = val_eval.total;
    log.val_accuracy = val_eval.accuracy;
    bundle.log.push_back(log);
    if (val_eval.total < best_val) {
      best_val = val_eval.total;
      best_params = detail::clone_parameters(state);
      bundle.best_epoch = epoch;
    }
  }
  if (!best_params.empty()) detail::restore_parameters(state, best_params);
  bundle.net->eval();
  return bundle;
}

// --- checkpoint archive: parameters + layout + config + metric log --------

inline nlohmann::json log_to_json(const std::vector<EpochLog>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log)
    out.push_back({{"epoch", e.epoch},
                   {"train_ce", e.train_ce},
                   {"train_dc", e.train_dc},
                   {"train_total", e.train_total},
                   {"val_ce", e.val_ce},
                   {"val_dc", e.val_dc},
                   {"val_total", e.val_total},
                   {"val_accuracy", e.val_accuracy}});
  return out;
}

inline void save_bundle(const std::string& path, const ModelBundle& bundle) {
  torch::serialize::OutputArchive archive;
  torch::serialize::OutputArchive net_arch;
  bundle.net->save(net_arch);
  archive.write("net", net_arch);
  for (size_t k = 0; k < bundle.heads.heads.size(); ++k) {
    torch::serialize::OutputArchive head_arch;
    bundle.heads.heads[k]->save(head_arch);
    archive.write("head_" + std::to_string(k), head_arch);
  }
  nlohmann::json meta = {
      {"names", bundle.layout.names},
      {"dims", bundle.layout.dims},
      {"class_counts", bundle.class_counts},
      {"resolution", bundle.net->resolution},
      {"best_epoch", bundle.best_epoch},
      {"config",
       {{"lambda_dc", bundle.config.lambda_dc},
        {"batch_size", bundle.config.batch_size},
        {"learning_rate", bundle.config.learning_rate},
        {"weight_decay", bundle.config.weight_decay},
        {"epochs", bundle.config.epochs},
        {"seed", bundle.config.seed}}},
      {"log", log_to_json(bundle.log)},
  };
  archive.write("meta", torch::IValue(meta.dump()));
  archive.save_to(path);
}

inline ModelBundle load_bundle(const std::string& path, std::vector<int64_t> widths = {}) {
  torch::serialize::InputArchive archive;
  archive.load_from(path);
  torch::IValue meta_str;
  archive.read("meta", meta_str);
  auto meta = nlohmann::json::parse(meta_str.toStringRef());

  ModelBundle bundle;
  bundle.layout.names = meta.at("names").get<std::vector<std::string>>();
  bundle.layout.dims = meta.at("dims").get<std::vector<int64_t>>();
  bundle.class_counts = meta.at("class_counts").get<std::vector<int64_t>>();
  bundle.best_epoch = meta.at("best_epoch").get<int64_t>();
  const auto& cfg = meta.at("config");
  bundle.config.lambda_dc = cfg.at("lambda_dc").get<double>();
  bundle.config.batch_size = cfg.at("batch_size").get<int64_t>();
  bundle.config.learning_rate = cfg.at("learning_rate").get<double>();
  bundle.config.weight_decay = cfg.at("weight_decay").get<double>();
  bundle.config.epochs = cfg.at("epochs").get<int64_t>();
  bundle.config.seed = cfg.at("seed").get<uint64_t>();
  for (const auto& e : meta.at("log")) {
    EpochLog log;
    log.epoch = e.at("epoch").get<int64_t>();
    log.train_ce = e.at("train_ce").get<double>();
    log.train_dc = e.at("train_dc").get<double>();
    log.train_total = e.at("train_total").get<double>();
    log.val_ce = e.at("val_ce").get<double>();
    log.val_dc = e.at("val_dc").get<double>();
    log.val_total = e.at("val_total").get<double>();
    log.val_accuracy = e.at("val_accuracy").get<std::vector<double>>();
    bundle.log.push_back(log);
  }
  bundle.net = EncoderNet(meta.at("resolution").get<int64_t>(), bundle.layout.total(), widths);
  torch::serialize::InputArchive net_arch;
  archive.read("net", net_arch);
  bundle.net->load(net_arch);
  bundle.heads = ClassifierHeads::make(bundle.layout, bundle.class_counts);
  for (size_t k = 0; k < bundle.heads.heads.size(); ++k) {
    torch::serialize::InputArchive head_arch;
    archive.read("head_" + std::to_string(k), head_arch);
    bundle.heads.heads[k]->load(head_arch);
  }
  bundle.net->eval();
  return bundle;
}

}  // namespace latsep::encoder
