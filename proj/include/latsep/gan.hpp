#pragma once

// Miniature style-based GAN with per-subspace mapping networks, a
// three-headed discriminator (adversarial score, latent estimate, pixel
// feature), inversion and subspace losses, ring-buffered dCor estimation,
// and subspace-swap generation.

#include <torch/torch.h>

#include <cmath>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "latsep/common.hpp"
#include "latsep/dependence.hpp"
#include "latsep/encoder.hpp"
#include "json.hpp"

namespace latsep::gan {

using encoder::SubspaceLayout;

struct GanTrainConfig {
  int64_t resolution = 32;
  std::vector<std::string> subspace_names = {"attribute", "camera", "identity"};
  std::vector<int64_t> subspace_dims = {4, 12, 16};
  std::vector<int64_t> class_counts = {3, 5, 0};  // 0 marks an unsupervised subspace
  double lambda_pl = 2.0;
  double lambda_w = 1.0;
  double lambda_p = 2.0;
  double lambda_c = 0.04;
  double lambda_dc = 0.2;
  int64_t r1_interval = 16;  // lazy regularization; weights rescaled by the interval
  int64_t pl_interval = 8;
  double style_mixing_prob = 0.5;
  int64_t ring_buffer_batches = 5;
  int64_t batch_size = 56;
  double learning_rate = 2.5e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  int64_t epochs = 10;
  uint64_t seed = 0;

  // single-device instance of the 0.0002 * image_size / (batch * devices)
  // heuristic
  double lambda_r1() const { return 0.0002 * resolution / static_cast<double>(batch_size); }

  SubspaceLayout layout() const { return {subspace_names, subspace_dims}; }

  void validate() const {
    layout().validate();
    if (subspace_names.size() != class_counts.size())
      throw config_error("gan: class_counts must align with subspaces");
    if (resolution < 8 || (resolution & (resolution - 1)) != 0)
      throw config_error("gan: resolution must be a power of two >= 8");
    for (double l : {lambda_pl, lambda_w, lambda_p, lambda_c, lambda_dc})
      if (l < 0) throw config_error("gan: loss weights must be nonnegative");
    if (ring_buffer_batches < 1) throw config_error("gan: ring_buffer_batches must be >= 1");
    if (batch_size < 4) throw config_error("gan: batch size too small");
    if (style_mixing_prob < 0 || style_mixing_prob > 1)
      throw config_error("gan: style_mixing_prob must be in [0,1]");
  }
};

struct LatentCode {
  std::vector<torch::Tensor> z_parts;
  std::vector<torch::Tensor> w_parts;
  torch::Tensor w;  // concatenation in layout order
};

// --- generator --------------------------------------------------------------

// Equalized learning rate: weights stored at unit scale and rescaled by
// 1/sqrt(fan_in) at runtime, so the shared Adam step size suits every
// layer. The architecture's stock learning rate assumes this.
struct EqLinearImpl : torch::nn::Module {
  torch::Tensor weight;
  torch::Tensor bias;
  double scale = 1.0;
  double lr_mul = 1.0;

  EqLinearImpl(int64_t in, int64_t out, double lr_mul_ = 1.0, double bias_init = 0.0)
      : lr_mul(lr_mul_) {
    weight = register_parameter("weight", torch::randn({out, in}) / lr_mul);
    bias = register_parameter("bias", torch::full({out}, bias_init / lr_mul));
    scale = lr_mul / std::sqrt(static_cast<double>(in));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::nn::functional::linear(x, weight * scale, bias * lr_mul);
  }
};
TORCH_MODULE(EqLinear);

struct EqConv2dImpl : torch::nn::Module {
  torch::Tensor weight;
  torch::Tensor bias;
  double scale = 1.0;
  int64_t stride = 1;
  int64_t padding = 0;

  EqConv2dImpl(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride_,
               int64_t padding_)
      : stride(stride_), padding(padding_) {
    weight = register_parameter("weight", torch::randn({out_ch, in_ch, kernel, kernel}));
    bias = register_parameter("bias", torch::zeros({out_ch}));
    scale = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
  }

  torch::Tensor forward(const torch::Tensor& x) {
    return torch::conv2d(x, weight * scale, bias, stride, padding);
  }
};
TORCH_MODULE(EqConv2d);

struct MappingNetworkImpl : torch::nn::Module {
  std::vector<EqLinear> layers;

  explicit MappingNetworkImpl(int64_t dim) {
    for (int i = 0; i < 8; ++i) {
      auto l = EqLinear(dim, dim, /*lr_mul=*/0.01);  // damped mapping updates
      register_module("fc" + std::to_string(i), l);
      layers.push_back(l);
    }
  }

  torch::Tensor forward(const torch::Tensor& z) {
    auto x = z * torch::rsqrt(z.pow(2).mean(1, true) + 1e-8);  // pixel norm
    // sqrt(2) activation gain keeps the signal scale through the stack;
    // without it eight leaky-relu layers shrink w toward a constant and the
    // styles stop modulating anything
    for (auto& l : layers)
      x = torch::leaky_relu(l->forward(x), 0.2) * std::sqrt(2.0);
    return x;
  }
};
TORCH_MODULE(MappingNetwork);

// Weight-modulated convolution: per-sample channel scaling from an affine
// map of the style vector, optional demodulation, grouped convolution.
struct ModulatedConv2dImpl : torch::nn::Module {
  torch::Tensor weight;  // unit-scale storage; equalized 1/sqrt(fan_in) at runtime
  torch::Tensor bias;
  EqLinear affine{nullptr};
  double scale = 1.0;
  int64_t kernel = 3;
  bool demodulate = true;

  ModulatedConv2dImpl(int64_t in_ch, int64_t out_ch, int64_t style_dim, int64_t kernel_,
                      bool demodulate_)
      : kernel(kernel_), demodulate(demodulate_) {
    weight = register_parameter("weight", torch::randn({out_ch, in_ch, kernel, kernel}));
    scale = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel * kernel);
    bias = register_parameter("bias", torch::zeros({out_ch}));
    // styles start at identity modulation
    affine = register_module("affine", EqLinear(style_dim, in_ch, 1.0, /*bias_init=*/1.0));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& w_style) {
    const int64_t b = x.size(0), in_ch = weight.size(1), out_ch = weight.size(0);
    auto style = affine->forward(w_style);  // (B, in)
    auto wmod = (weight * scale).unsqueeze(0) * style.reshape({b, 1, in_ch, 1, 1});
    if (demodulate) {
      auto d = torch::rsqrt(wmod.pow(2).sum({2, 3, 4}) + 1e-8);
      wmod = wmod * d.reshape({b, out_ch, 1, 1, 1});
    }
    auto grouped = x.reshape({1, b * in_ch, x.size(2), x.size(3)});
    auto out = torch::conv2d(grouped, wmod.reshape({b * out_ch, in_ch, kernel, kernel}),
                             {}, 1, kernel / 2, 1, /*groups=*/b);
    return out.reshape({b, out_ch, out.size(2), out.size(3)}) + bias.reshape({1, -1, 1, 1});
  }
};
TORCH_MODULE(ModulatedConv2d);

namespace detail {

inline int64_t synthesis_channels(int64_t res) {
  if (res <= 8) return 128;
  if (res == 16) return 64;
  if (res == 32) return 48;
  return 32;
}

inline torch::Tensor layer_noise(const torch::Tensor& like,
                                 torch::optional<torch::Generator> gen) {
  auto shape = std::vector<int64_t>{like.size(0), 1, like.size(2), like.size(3)};
  return gen ? torch::randn(shape, *gen, like.options())
             : torch::randn(shape, like.options());
}

}  // namespace detail

// Skip-connection synthesis network: learned 4x4 constant, one modulated
// conv per resolution step plus one refining conv, per-layer noise, and a
// per-block toRGB added onto an upsampled running RGB image. Output passes
// through tanh so images live in [-1, 1].
struct SynthesisNetworkImpl : torch::nn::Module {
  torch::Tensor constant;
  std::vector<ModulatedConv2d> convs;       // style slots, in order
  std::vector<ModulatedConv2d> to_rgbs;
  std::vector<torch::Tensor> noise_gains;
  std::vector<int64_t> conv_slot;           // style-slot index of each conv
  std::vector<int64_t> rgb_slot;
  int64_t resolution = 0;
  int64_t style_dim = 0;
  int64_t n_slots = 0;

  SynthesisNetworkImpl(int64_t resolution_, int64_t style_dim_)
      : resolution(resolution_), style_dim(style_dim_) {
    int64_t ch = detail::synthesis_channels(4);
    constant = register_parameter("constant", torch::randn({1, ch, 4, 4}));
    int64_t slot = 0, idx = 0;
    auto add_conv = [&](int64_t in_ch, int64_t out_ch) {
      auto c = ModulatedConv2d(in_ch, out_ch, style_dim, 3, true);
      register_module("conv" + std::to_string(idx), c);
      noise_gains.push_back(
          register_parameter("noise_gain" + std::to_string(idx), torch::zeros({1})));
      convs.push_back(c);
      conv_slot.push_back(slot++);
      ++idx;
    };
    auto add_rgb = [&](int64_t in_ch) {
      auto c = ModulatedConv2d(in_ch, 3, style_dim, 1, false);
      register_module("torgb" + std::to_string(to_rgbs.size()), c);
      to_rgbs.push_back(c);
      rgb_slot.push_back(slot++);
    };
    add_conv(ch, ch);  // 4x4 block
    add_rgb(ch);
    for (int64_t res = 8; res <= resolution; res *= 2) {
      int64_t out_ch = detail::synthesis_channels(res);
      add_conv(ch, out_ch);  // applied after 2x upsampling
      add_conv(out_ch, out_ch);
      add_rgb(out_ch);
      ch = out_ch;
    }
    n_slots = slot;
  }

  // ws: (B, n_slots, style_dim); per-slot styles enable style mixing
  torch::Tensor forward(const torch::Tensor& ws, torch::optional<torch::Generator> gen) {
    if (ws.dim() != 3 || ws.size(1) != n_slots || ws.size(2) != style_dim)
      throw shape_error("synthesis: expected styles of shape (B, " +
                        std::to_string(n_slots) + ", " + std::to_string(style_dim) + ")");
    const int64_t b = ws.size(0);
    auto run_conv = [&](size_t i, const torch::Tensor& x) {
      auto h = convs[i]->forward(x, ws.select(1, conv_slot[i]));
      h = h + noise_gains[i] * detail::layer_noise(h, gen);
      return torch::leaky_relu(h, 0.2);
    };
    auto x = run_conv(0, constant.expand({b, -1, -1, -1}));
    auto rgb = to_rgbs[0]->forward(x, ws.select(1, rgb_slot[0]));
    size_t conv_i = 1;
    for (size_t block = 1; block < to_rgbs.size(); ++block) {
      x = torch::upsample_nearest2d(x, c10::nullopt, std::vector<double>{2.0, 2.0});
      x = run_conv(conv_i++, x);
      x = run_conv(conv_i++, x);
      rgb = torch::upsample_nearest2d(rgb, c10::nullopt, std::vector<double>{2.0, 2.0}) +
            to_rgbs[block]->forward(x, ws.select(1, rgb_slot[block]));
    }
    return torch::tanh(rgb);
  }

  torch::Tensor broadcast(const torch::Tensor& w) const {
    return w.unsqueeze(1).expand({w.size(0), n_slots, style_dim});
  }
};
TORCH_MODULE(SynthesisNetwork);

struct GeneratorImpl : torch::nn::Module {
  std::vector<MappingNetwork> mappings;  // one per subspace
  SynthesisNetwork synthesis{nullptr};
  SubspaceLayout layout;

  GeneratorImpl(const SubspaceLayout& layout_, int64_t resolution) : layout(layout_) {
    layout.validate();
    for (size_t k = 0; k < layout.dims.size(); ++k) {
      auto m = MappingNetwork(layout.dims[k]);
      register_module("mapping_" + layout.names[k], m);
      mappings.push_back(m);
    }
    synthesis = register_module("synthesis", SynthesisNetwork(resolution, layout.total()));
  }

  std::vector<torch::Tensor> map(const std::vector<torch::Tensor>& z_parts) {
    if (z_parts.size() != mappings.size())
      throw shape_error("generator: z part count mismatch");
    std::vector<torch::Tensor> w_parts;
    for (size_t k = 0; k < mappings.size(); ++k) {
      if (z_parts[k].size(1) != layout.dims[k])
        throw shape_error("generator: z part dimension mismatch");
      w_parts.push_back(mappings[k]->forward(z_parts[k]));
    }
    return w_parts;
  }
};
TORCH_MODULE(Generator);

// --- discriminator ----------------------------------------------------------

struct DiscriminatorOutput {
  torch::Tensor score;          // (B,) real/fake logit
  torch::Tensor w_hat;          // (B, d) latent estimate
  torch::Tensor pixel_feature;  // (B, f) penultimate features
};

struct DiscriminatorImpl : torch::nn::Module {
  std::vector<EqConv2d> trunk;
  EqLinear to_feature{nullptr};
  EqLinear adv_head{nullptr};
  EqLinear latent_head{nullptr};
  int64_t resolution = 0;
  int64_t feature_dim = 128;

  DiscriminatorImpl(int64_t resolution_, int64_t latent_dim) : resolution(resolution_) {
    auto add = [&](int64_t in_ch, int64_t out_ch, int64_t stride) {
      auto c = EqConv2d(in_ch, out_ch, 3, stride, 1);
      register_module("conv" + std::to_string(trunk.size()), c);
      trunk.push_back(c);
    };
    int64_t ch = detail::synthesis_channels(resolution);
    add(3, ch, 1);
    for (int64_t res = resolution; res > 4; res /= 2) {
      int64_t out_ch = detail::synthesis_channels(res / 2);
      add(ch, out_ch, 2);
      ch = out_ch;
    }
    to_feature = register_module("to_feature", EqLinear(ch * 4 * 4, feature_dim));
    adv_head = register_module("adv_head", EqLinear(feature_dim, 1));
    latent_head = register_module("latent_head", EqLinear(feature_dim, latent_dim));
  }

  DiscriminatorOutput forward(const torch::Tensor& images) {
    if (images.size(2) != resolution || images.size(3) != resolution)
      throw shape_error("discriminator: resolution mismatch");
    auto h = images;
    for (auto& c : trunk) h = torch::leaky_relu(c->forward(h), 0.2);
    h = h.flatten(1);
    auto p = torch::leaky_relu(to_feature->forward(h), 0.2);
    return {adv_head->forward(p).squeeze(1), latent_head->forward(p), p};
  }
};
TORCH_MODULE(Discriminator);

// --- supervised heads and ring buffer ---------------------------------------

struct SupervisedHeads {
  std::vector<torch::nn::Linear> heads;
  std::vector<size_t> subspace;  // index into the layout per head

  static SupervisedHeads make(const SubspaceLayout& layout,
                              const std::vector<int64_t>& class_counts) {
    if (class_counts.size() != layout.dims.size())
      throw config_error("gan heads: class_counts must align with subspaces");
    SupervisedHeads out;
    for (size_t k = 0; k < class_counts.size(); ++k) {
      if (class_counts[k] == 0) continue;
      out.heads.emplace_back(layout.dims[k], class_counts[k]);
      out.subspace.push_back(k);
    }
    return out;
  }

  std::vector<torch::Tensor> parameters() const {
    std::vector<torch::Tensor> out;
    for (const auto& h : heads) {
      auto head = h;
      for (auto& p : head->parameters()) out.push_back(p);
    }
    return out;
  }
};

// FIFO store of gradient-detached past latent batches; the dCor evaluation
// set is the stored entries plus the current (gradient-carrying) batch.
class RingBuffer {
 public:
  explicit RingBuffer(int64_t total_batches) : capacity_(total_batches - 1) {
    if (total_batches < 1) throw config_error("ring buffer: need >= 1 batch");
  }

  torch::Tensor augment(const torch::Tensor& current) const {
    if (past_.empty()) return current;
    std::vector<torch::Tensor> all(past_.begin(), past_.end());
    all.push_back(current);
    return torch::cat(all, 0);
  }

  void push(const torch::Tensor& batch) {
    if (capacity_ == 0) return;
    past_.push_back(batch.detach());
    if (static_cast<int64_t>(past_.size()) > capacity_) past_.pop_front();
  }

  int64_t stored() const { return static_cast<int64_t>(past_.size()); }

 private:
  int64_t capacity_;
  std::deque<torch::Tensor> past_;
};

// --- sampling and generation --------------------------------------------------

inline LatentCode sample_latent(Generator& gen, int64_t n, torch::Generator& rng) {
  LatentCode code;
  for (int64_t d : gen->layout.dims)
    code.z_parts.push_back(torch::randn({n, d}, rng, torch::kFloat32));
  code.w_parts = gen->map(code.z_parts);
  code.w = torch::cat(code.w_parts, 1);
  return code;
}

inline torch::Tensor generate(Generator& gen, const torch::Tensor& w,
                              torch::optional<torch::Generator> noise_rng = torch::nullopt) {
  if (w.dim() != 2 || w.size(1) != gen->layout.total())
    throw shape_error("generate: expected w of dimension " +
                      std::to_string(gen->layout.total()));
  return gen->synthesis->forward(gen->synthesis->broadcast(w), noise_rng);
}

// [-1,1] network range -> [0,1] export range
inline torch::Tensor to_unit_range(const torch::Tensor& images) {
  return ((images + 1.0) * 0.5).clamp(0.0, 1.0);
}

inline torch::Tensor to_network_range(const torch::Tensor& images) {
  return images * 2.0 - 1.0;
}

// Styles for a style-mixing step: slots at and beyond a random crossover
// point take the second code's w.
inline torch::Tensor mix_styles(SynthesisNetwork& synth, const torch::Tensor& w_a,
                                const torch::Tensor& w_b, int64_t crossover) {
  if (crossover < 1 || crossover >= synth->n_slots)
    throw config_error("mix_styles: crossover out of range");
  auto ws = synth->broadcast(w_a).clone();
  ws.slice(1, crossover) = synth->broadcast(w_b).slice(1, crossover);
  return ws;
}

// --- losses -------------------------------------------------------------------

// non-saturating minimax terms
inline torch::Tensor discriminator_adversarial(const torch::Tensor& real_score,
                                               const torch::Tensor& fake_score) {
  return torch::softplus(-real_score).mean() + torch::softplus(fake_score).mean();
}

inline torch::Tensor generator_adversarial(const torch::Tensor& fake_score) {
  return torch::softplus(-fake_score).mean();
}

// R1 gradient penalty: 1/2 E[ |grad_x score|^2 ] on real images
inline torch::Tensor r1_penalty(Discriminator& disc, const torch::Tensor& real) {
  auto x = real.detach().requires_grad_(true);
  auto score = disc->forward(x).score.sum();
  auto grad = torch::autograd::grad({score}, {x}, {}, true, true)[0];
  return 0.5 * grad.pow(2).sum({1, 2, 3}).mean();
}

// path-length penalty with a running exponential moving average target
struct PathLengthState {
  double ema = 0.0;
  double decay = 0.99;
};

inline torch::Tensor path_length_penalty(Generator& gen, const torch::Tensor& w,
                                         PathLengthState& state) {
  auto wg = w.detach().requires_grad_(true);
  auto images = generate(gen, wg);
  auto noise = torch::randn_like(images) /
               std::sqrt(static_cast<double>(images.size(2) * images.size(3)));
  auto y = (images * noise).sum();
  auto grad = torch::autograd::grad({y}, {wg}, {}, true, true)[0];
  auto lengths = grad.pow(2).sum(1).sqrt();
  auto penalty = (lengths - state.ema).pow(2).mean();
  state.ema = state.decay * state.ema + (1 - state.decay) * lengths.mean().item<double>();
  return penalty;
}

struct InversionLosses {
  torch::Tensor l_w;  // | w - d1(g(w)) |^2 on sampled codes
  torch::Tensor l_p;  // | p(x) - p(g(d1(x))) |^2 cycle through the encoder
};

inline InversionLosses inversion_losses(Generator& gen, Discriminator& disc,
                                        const torch::Tensor& real,
                                        const torch::Tensor& fake_images,
                                        const torch::Tensor& fake_w) {
  InversionLosses out;
  out.l_w = (fake_w - disc->forward(fake_images).w_hat).pow(2).sum(1).mean();
  auto real_out = disc->forward(real);
  auto cycle = generate(gen, real_out.w_hat);
  out.l_p = (real_out.pixel_feature - disc->forward(cycle).pixel_feature)
                .pow(2).sum(1).mean();
  return out;
}

struct SupervisionLosses {
  torch::Tensor ce;
  torch::Tensor dc;
};

// Cross-entropy on supervised subspace slices of the real-image latent
// estimate plus ring-augmented pairwise dCor. Heads receive only CE
// gradients (dCor reads the slices directly). The caller pushes the
// detached batch to the ring afterwards.
inline SupervisionLosses subspace_supervision(const torch::Tensor& w_hat_real,
                                              const std::vector<torch::Tensor>& labels,
                                              const SupervisedHeads& heads,
                                              const SubspaceLayout& layout,
                                              const RingBuffer& ring) {
  SupervisionLosses out;
  out.ce = torch::zeros({}, w_hat_real.options());
  for (size_t h = 0; h < heads.heads.size(); ++h) {
    auto head = heads.heads[h];
    const size_t k = heads.subspace[h];
    if (static_cast<size_t>(k) >= labels.size() || !labels[k].defined())
      throw data_error("subspace_supervision: missing labels for subspace " +
                       layout.names[k]);
    auto logits = head->forward(layout.slice(w_hat_real, k));
    out.ce = out.ce + torch::nn::functional::cross_entropy(logits, labels[k]);
  }
  if (!heads.heads.empty()) out.ce = out.ce / static_cast<double>(heads.heads.size());
  auto augmented = ring.augment(w_hat_real);
  out.dc = dependence::disentanglement_loss(layout.slices(augmented))
               .to(w_hat_real.dtype());
  return out;
}

// --- swapping ------------------------------------------------------------------

// pure code-level swap: a with the named part replaced by b's part
inline torch::Tensor swap_subspace(const torch::Tensor& w_a, const torch::Tensor& w_b,
                                   const SubspaceLayout& layout, const std::string& name) {
  if (!w_a.sizes().equals(w_b.sizes()))
    throw shape_error("swap_subspace: code shapes differ");
  size_t k = layout.dims.size();
  for (size_t i = 0; i < layout.names.size(); ++i)
    if (layout.names[i] == name) k = i;
  if (k == layout.dims.size())
    throw config_error("swap_subspace: unknown subspace '" + name + "'");
  auto out = w_a.clone();
  int64_t lo = 0;
  for (size_t i = 0; i < k; ++i) lo += layout.dims[i];
  out.slice(-1, lo, lo + layout.dims[k]) = w_b.slice(-1, lo, lo + layout.dims[k]);
  return out;
}

inline torch::Tensor encode_image(Discriminator& disc, const torch::Tensor& images) {
  auto d = disc;
  d->eval();
  torch::NoGradGuard no_grad;
  auto out = d->forward(images).w_hat;
  d->train();
  return out;
}

struct RotateSwapResult {
  torch::Tensor images;  // regenerated batch in [0,1]
  torch::Tensor labels;  // reassigned labels for the swapped factor
};

// Element i receives element i-1's named subspace (cyclic shift by one);
// labels for that factor move with the parts.
inline RotateSwapResult rotate_swap_protocol(Generator& gen, Discriminator& disc,
                                             const torch::Tensor& images,
                                             const torch::Tensor& labels,
                                             const std::string& subspace_name,
                                             uint64_t noise_seed = 0) {
  if (images.size(0) < 2)
    throw data_error("rotate_swap_protocol: need a batch of at least 2");
  auto w = encode_image(disc, to_network_range(images));
  auto donor_w = torch::roll(w, 1, 0);
  auto swapped = swap_subspace(w, donor_w, gen->layout, subspace_name);
  auto g = gen;
  g->eval();
  torch::NoGradGuard no_grad;
  auto rng = make_generator(noise_seed);
  auto out_images = to_unit_range(generate(g, swapped, rng));
  g->train();
  return {out_images, torch::roll(labels, 1, 0)};
}

// --- training -------------------------------------------------------------------

struct StepRecord {
  int64_t step = 0;
  bool mixed = false;
  double d_adv = 0, g_adv = 0;
  double l_w_d = 0, l_p_d = 0, l_w_g = 0, l_p_g = 0;
  double ce = 0, dc = 0;
  double r1 = 0, pl = 0;  // raw penalty values; 0 when off-schedule
  double d_total = 0, g_total = 0;
};

struct GanBundle {
  Generator gen{nullptr};
  Discriminator disc{nullptr};
  SupervisedHeads heads;
  GanTrainConfig config;
  std::vector<StepRecord> log;
  PathLengthState pl_state;
};

namespace detail {

inline void check_finite(const torch::Tensor& loss, const char* objective, int64_t step) {
  if (!torch::isfinite(loss).all().item<bool>())
    throw numeric_error(std::string("gan: non-finite ") + objective + " loss at step " +
                        std::to_string(step) + "; last finite step " +
                        std::to_string(step - 1) + " is the usable checkpoint");
}

}  // namespace detail

// One alternating optimization step: discriminator update on the combined
// objective, then generator update. With probability style_mixing_prob the
// step uses style mixing and both objectives skip the inversion terms.
inline StepRecord train_step(GanBundle& model, torch::optim::Adam& opt_g,
                             torch::optim::Adam& opt_d, const torch::Tensor& real,
                             const std::vector<torch::Tensor>& labels, RingBuffer& ring,
                             torch::Generator& rng, int64_t step) {
  const auto& cfg = model.config;
  auto layout = model.gen->layout;
  StepRecord rec;
  rec.step = step;
  rec.mixed =
      torch::rand({1}, rng, torch::kFloat64).item<double>() < cfg.style_mixing_prob;
  const int64_t n = real.size(0);

  auto make_fake = [&]() {
    auto code = sample_latent(model.gen, n, rng);
    torch::Tensor ws;
    if (rec.mixed) {
      auto code_b = sample_latent(model.gen, n, rng);
      int64_t crossover =
          1 + torch::randint(model.gen->synthesis->n_slots - 1, {1}, rng).item<int64_t>();
      ws = mix_styles(model.gen->synthesis, code.w, code_b.w, crossover);
    } else {
      ws = model.gen->synthesis->broadcast(code.w);
    }
    auto images = model.gen->synthesis->forward(ws, rng);
    return std::make_pair(images, code.w);
  };

  // --- discriminator step
  {
    auto [fake, fake_w] = make_fake();
    fake = fake.detach();
    fake_w = fake_w.detach();
    auto real_out = model.disc->forward(real);
    auto fake_score = model.disc->forward(fake).score;
    auto d_loss = discriminator_adversarial(real_out.score, fake_score);
    rec.d_adv = d_loss.item<double>();
    if (!rec.mixed) {
      auto inv = inversion_losses(model.gen, model.disc, real, fake, fake_w);
      rec.l_w_d = inv.l_w.item<double>();
      rec.l_p_d = inv.l_p.item<double>();
      d_loss = d_loss + cfg.lambda_w * inv.l_w + cfg.lambda_p * inv.l_p;
    }
    auto sup = subspace_supervision(real_out.w_hat, labels, model.heads, layout, ring);
    rec.ce = sup.ce.item<double>();
    rec.dc = sup.dc.item<double>();
    d_loss = d_loss + cfg.lambda_c * sup.ce + cfg.lambda_dc * sup.dc;
    if (step % cfg.r1_interval == 0) {
      auto r1 = r1_penalty(model.disc, real);
      rec.r1 = r1.item<double>();
      d_loss = d_loss + cfg.lambda_r1() * static_cast<double>(cfg.r1_interval) * r1;
    }
    detail::check_finite(d_loss, "discriminator", step);
    rec.d_total = d_loss.item<double>();
    opt_d.zero_grad();
    opt_g.zero_grad();  // cycle terms touch the generator graph
    d_loss.backward();
    opt_d.step();
    ring.push(real_out.w_hat);
  }

  // --- generator step
  {
    auto [fake, fake_w] = make_fake();
    auto g_loss = generator_adversarial(model.disc->forward(fake).score);
    rec.g_adv = g_loss.item<double>();
    if (!rec.mixed) {
      auto inv = inversion_losses(model.gen, model.disc, real, fake, fake_w);
      rec.l_w_g = inv.l_w.item<double>();
      rec.l_p_g = inv.l_p.item<double>();
      g_loss = g_loss + cfg.lambda_w * inv.l_w + cfg.lambda_p * inv.l_p;
    }
    if (step % cfg.pl_interval == 0) {
      auto code = sample_latent(model.gen, n, rng);
      auto pl = path_length_penalty(model.gen, code.w, model.pl_state);
      rec.pl = pl.item<double>();
      g_loss = g_loss + cfg.lambda_pl * static_cast<double>(cfg.pl_interval) * pl;
    }
    detail::check_finite(g_loss, "generator", step);
    rec.g_total = g_loss.item<double>();
    opt_g.zero_grad();
    opt_d.zero_grad();
    g_loss.backward();
    opt_g.step();
  }
  return rec;
}

// images in [0,1]; labels[k] defined exactly for supervised subspaces
inline GanBundle train_gan(const torch::Tensor& images,
                           const std::vector<torch::Tensor>& labels,
                           const GanTrainConfig& config,
                           const GanBundle* resume_from = nullptr) {
  config.validate();
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != config.resolution ||
      images.size(3) != config.resolution)
    throw shape_error("train_gan: expected (N,3,R,R) images at the configured resolution");
  torch::manual_seed(config.seed);
  GanBundle model;
  model.config = config;
  auto layout = config.layout();
  model.gen = Generator(layout, config.resolution);
  model.disc = Discriminator(config.resolution, layout.total());
  model.heads = SupervisedHeads::make(layout, config.class_counts);

  // warm start: adopt the previous run's weights, log, and path-length EMA;
  // the step counter continues monotonically (optimizer moments restart)
  if (resume_from) {
    torch::NoGradGuard no_grad;
    auto copy_into = [](const std::vector<torch::Tensor>& dst,
                        const std::vector<torch::Tensor>& src) {
      if (dst.size() != src.size())
        throw config_error("train_gan: resume checkpoint does not match the architecture");
      for (size_t i = 0; i < dst.size(); ++i) dst[i].copy_(src[i]);
    };
    copy_into(model.gen->parameters(), resume_from->gen->parameters());
    copy_into(model.disc->parameters(), resume_from->disc->parameters());
    copy_into(model.heads.parameters(), resume_from->heads.parameters());
    model.log = resume_from->log;
    model.pl_state = resume_from->pl_state;
  }

  std::vector<torch::Tensor> params_d = model.disc->parameters();
  for (auto& p : model.heads.parameters()) params_d.push_back(p);
  auto opts = [&] {
    return torch::optim::AdamOptions(config.learning_rate)
        .betas({config.beta1, config.beta2})
        .eps(config.eps);
  };
  torch::optim::Adam opt_g(model.gen->parameters(), opts());
  torch::optim::Adam opt_d(params_d, opts());

  auto rng = make_generator(config.seed);
  RingBuffer ring(config.ring_buffer_batches);
  auto net_images = to_network_range(images);
  const int64_t n = images.size(0);
  int64_t step = static_cast<int64_t>(model.log.size());
  for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    auto perm = torch::randperm(n, rng, torch::kInt64);
    for (int64_t start = 0; start + config.batch_size <= n; start += config.batch_size) {
      auto idx = perm.slice(0, start, start + config.batch_size);
      auto real = net_images.index_select(0, idx);
      std::vector<torch::Tensor> batch_labels(labels.size());
      for (size_t k = 0; k < labels.size(); ++k)
        if (labels[k].defined()) batch_labels[k] = labels[k].index_select(0, idx);
      model.log.push_back(
          train_step(model, opt_g, opt_d, real, batch_labels, ring, rng, step));
      ++step;
    }
  }
  return model;
}

// --- evaluation helpers ----------------------------------------------------------

struct InversionEval {
  double l_w = 0;
  double l_p = 0;
};

inline InversionEval eval_inversion(GanBundle& model, const torch::Tensor& images,
                                    int64_t n_codes, uint64_t seed) {
  auto gen = model.gen;
  auto disc = model.disc;
  gen->eval();
  disc->eval();
  torch::NoGradGuard no_grad;
  auto rng = make_generator(seed);
  auto code = sample_latent(gen, n_codes, rng);
  auto fake = generate(gen, code.w, rng);
  InversionEval out;
  out.l_w = (code.w - disc->forward(fake).w_hat).pow(2).sum(1).mean().item<double>();
  auto real_out = disc->forward(to_network_range(images));
  auto cycle = generate(gen, real_out.w_hat, rng);
  out.l_p = (real_out.pixel_feature - disc->forward(cycle).pixel_feature)
                .pow(2).sum(1).mean().item<double>();
  gen->train();
  disc->train();
  return out;
}

// --- serialization -----------------------------------------------------------------

inline nlohmann::json gan_config_to_json(const GanTrainConfig& c) {
  return nlohmann::json{{"resolution", c.resolution},
                        {"subspace_names", c.subspace_names},
                        {"subspace_dims", c.subspace_dims},
                        {"class_counts", c.class_counts},
                        {"lambda_pl", c.lambda_pl},
                        {"lambda_w", c.lambda_w},
                        {"lambda_p", c.lambda_p},
                        {"lambda_c", c.lambda_c},
                        {"lambda_dc", c.lambda_dc},
                        {"r1_interval", c.r1_interval},
                        {"pl_interval", c.pl_interval},
                        {"style_mixing_prob", c.style_mixing_prob},
                        {"ring_buffer_batches", c.ring_buffer_batches},
                        {"batch_size", c.batch_size},
                        {"learning_rate", c.learning_rate},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"eps", c.eps},
                        {"epochs", c.epochs},
                        {"seed", c.seed}};
}

inline GanTrainConfig gan_config_from_json(const nlohmann::json& j) {
  GanTrainConfig c;
  c.resolution = j.at("resolution").get<int64_t>();
  c.subspace_names = j.at("subspace_names").get<std::vector<std::string>>();
  c.subspace_dims = j.at("subspace_dims").get<std::vector<int64_t>>();
  c.class_counts = j.at("class_counts").get<std::vector<int64_t>>();
  c.lambda_pl = j.at("lambda_pl").get<double>();
  c.lambda_w = j.at("lambda_w").get<double>();
  c.lambda_p = j.at("lambda_p").get<double>();
  c.lambda_c = j.at("lambda_c").get<double>();
  c.lambda_dc = j.at("lambda_dc").get<double>();
  c.r1_interval = j.at("r1_interval").get<int64_t>();
  c.pl_interval = j.at("pl_interval").get<int64_t>();
  c.style_mixing_prob = j.at("style_mixing_prob").get<double>();
  c.ring_buffer_batches = j.at("ring_buffer_batches").get<int64_t>();
  c.batch_size = j.at("batch_size").get<int64_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.epochs = j.at("epochs").get<int64_t>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

inline nlohmann::json step_log_to_json(const std::vector<StepRecord>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : log)
    out.push_back({{"step", r.step},
                   {"mixed", r.mixed},
                   {"d_adv", r.d_adv},
                   {"g_adv", r.g_adv},
                   {"l_w_d", r.l_w_d},
                   {"l_p_d", r.l_p_d},
                   {"l_w_g", r.l_w_g},
                   {"l_p_g", r.l_p_g},
                   {"ce", r.ce},
                   {"dc", r.dc},
                   {"r1", r.r1},
                   {"pl", r.pl},
                   {"d_total", r.d_total},
                   {"g_total", r.g_total}});
  return out;
}

inline std::vector<StepRecord> step_log_from_json(const nlohmann::json& j) {
  std::vector<StepRecord> out;
  for (const auto& e : j) {
    StepRecord r;
    r.step = e.at("step").get<int64_t>();
    r.mixed = e.at("mixed").get<bool>();
    r.d_adv = e.at("d_adv").get<double>();
    r.g_adv = e.at("g_adv").get<double>();
    r.l_w_d = e.at("l_w_d").get<double>();
    r.l_p_d = e.at("l_p_d").get<double>();
    r.l_w_g = e.at("l_w_g").get<double>();
    r.l_p_g = e.at("l_p_g").get<double>();
    r.ce = e.at("ce").get<double>();
    r.dc = e.at("dc").get<double>();
    r.r1 = e.at("r1").get<double>();
    r.pl = e.at("pl").get<double>();
    r.d_total = e.at("d_total").get<double>();
    r.g_total = e.at("g_total").get<double>();
    out.push_back(r);
  }
  return out;
}

inline void save_gan(const GanBundle& model, const std::string& path) {
  torch::serialize::OutputArchive archive;
  nlohmann::json meta{{"config", gan_config_to_json(model.config)},
                      {"log", step_log_to_json(model.log)},
                      {"pl_ema", model.pl_state.ema},
                      {"code_fingerprint", code_fingerprint()}};
  archive.write("meta", torch::IValue(meta.dump()));
  torch::serialize::OutputArchive gen_arch;
  auto gen = model.gen;
  gen->save(gen_arch);
  archive.write("gen", gen_arch);
  torch::serialize::OutputArchive disc_arch;
  auto disc = model.disc;
  disc->save(disc_arch);
  archive.write("disc", disc_arch);
  for (size_t h = 0; h < model.heads.heads.size(); ++h) {
    torch::serialize::OutputArchive head_arch;
    auto head = model.heads.heads[h];
    head->save(head_arch);
    archive.write("head" + std::to_string(h), head_arch);
  }
  archive.save_to(path);
}

inline GanBundle load_gan(const std::string& path) {
  torch::serialize::InputArchive archive;
  archive.load_from(path);
  torch::IValue meta_str;
  archive.read("meta", meta_str);
  auto meta = nlohmann::json::parse(meta_str.toStringRef());
  GanBundle model;
  model.config = gan_config_from_json(meta.at("config"));
  model.log = step_log_from_json(meta.at("log"));
  model.pl_state.ema = meta.at("pl_ema").get<double>();
  auto layout = model.config.layout();
  model.gen = Generator(layout, model.config.resolution);
  model.disc = Discriminator(model.config.resolution, layout.total());
  model.heads = SupervisedHeads::make(layout, model.config.class_counts);
  torch::serialize::InputArchive gen_arch;
  archive.read("gen", gen_arch);
  model.gen->load(gen_arch);
  torch::serialize::InputArchive disc_arch;
  archive.read("disc", disc_arch);
  model.disc->load(disc_arch);
  for (size_t h = 0; h < model.heads.heads.size(); ++h) {
    torch::serialize::InputArchive head_arch;
    archive.read("head" + std::to_string(h), head_arch);
    model.heads.heads[h]->load(head_arch);
  }
  return model;
}

}  // namespace latsep::gan
