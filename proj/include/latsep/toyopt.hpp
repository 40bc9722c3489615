#pragma once

// Toy experiment: 2-D x 2-D point clouds with prescribed dependency
// patterns, optimized by Adam to minimize a chosen dependence measure
// while the dCor diagnostic is logged every step.

#include <torch/torch.h>

#include <cmath>
#include <string>
#include <vector>

#include "latsep/common.hpp"
#include "latsep/dependence.hpp"

namespace latsep::toyopt {

enum class Pattern { independent, linear, nonlinear_sine, nonlinear_circle, nonlinear_quadratic };

inline const char* pattern_name(Pattern p) {
  switch (p) {
    case Pattern::independent: return "independent";
    case Pattern::linear: return "linear";
    case Pattern::nonlinear_sine: return "nonlinear_sine";
    case Pattern::nonlinear_circle: return "nonlinear_circle";
    case Pattern::nonlinear_quadratic: return "nonlinear_quadratic";
  }
  throw config_error("unknown pattern");
}

inline Pattern pattern_from_name(const std::string& s) {
  if (s == "independent") return Pattern::independent;
  if (s == "linear") return Pattern::linear;
  if (s == "nonlinear_sine") return Pattern::nonlinear_sine;
  if (s == "nonlinear_circle") return Pattern::nonlinear_circle;
  if (s == "nonlinear_quadratic") return Pattern::nonlinear_quadratic;
  throw config_error("unknown pattern: " + s);
}

inline const char* measure_name(dependence::Measure m) {
  switch (m) {
    case dependence::Measure::dcor: return "dcor";
    case dependence::Measure::gmi: return "gmi";
    case dependence::Measure::cgmi: return "cgmi";
  }
  throw config_error("unknown measure");
}

inline dependence::Measure measure_from_name(const std::string& s) {
  if (s == "dcor") return dependence::Measure::dcor;
  if (s == "gmi") return dependence::Measure::gmi;
  if (s == "cgmi") return dependence::Measure::cgmi;
  throw config_error("unknown measure: " + s);
}

// A coordinate of one of the two clouds (cloud is 1 or 2).
struct Coordinate {
  int cloud = 1;
  int index = 0;
};

struct CoupledPair {
  Coordinate a;
  Coordinate b;
};

struct PointCloudPair {
  torch::Tensor w1;  // n x 2, float64
  torch::Tensor w2;  // n x 2, float64
  Pattern pattern = Pattern::independent;
  std::vector<CoupledPair> coupled;  // which coordinate pairs carry the dependence
};

struct ToyOptConfig {
  dependence::Measure measure = dependence::Measure::dcor;
  int64_t steps = 500;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  uint64_t seed = 0;
};

inline void validate(const ToyOptConfig& c) {
  if (c.steps < 1) throw config_error("toyopt: steps must be >= 1");
  if (!(c.learning_rate > 0)) throw config_error("toyopt: learning_rate must be > 0");
}

// Linear pattern: both w2 coordinates equal a damped projection of the
// w1 feature sum plus a shared fresh component. The rank-one sum
// alignment keeps the dependence fully visible to the collapsed
// (feature-sum) Gaussian MI; a full-rank copy would leave a
// sum-invisible residual that C-GMI minimization cannot remove.
inline constexpr double kLinearCoupling = 0.7;

// Quantizer for the "quadratic" pattern: a four-level piecewise-constant
// map split at 0 and +-t. With phi the standard normal density, the
// population covariance of g(x) with x ~ N(0,1) is
//   phi(t)(l4 - l1) + (phi(0) - phi(t))(l3 - l2),
// and l4 is solved so this vanishes: an even-moment-style dependence with
// no linear trace, like a centered quadratic, but strong enough that
// covariance-based measures cannot erode it. (A smooth centered
// quadratic tops out near dCor 0.48 after GMI minimization; this
// quantized profile holds above 0.6.)
struct QuadQuantizer {
  double t = 2.0;
  double l1 = -6.0, l2 = 0.0, l3 = 3.0, l4;
  QuadQuantizer() {
    auto phi = [](double x) { return std::exp(-x * x / 2.0) / std::sqrt(2.0 * M_PI); };
    l4 = l1 - (phi(0.0) - phi(t)) * (l3 - l2) / phi(t);
  }
  torch::Tensor operator()(const torch::Tensor& x) const {
    auto y = torch::full_like(x, l1);
    y = torch::where((x > -t) & (x <= 0.0), torch::full_like(x, l2), y);
    y = torch::where((x > 0.0) & (x <= t), torch::full_like(x, l3), y);
    y = torch::where(x > t, torch::full_like(x, l4), y);
    return y;
  }
};

inline PointCloudPair generate_pattern(Pattern pattern, int64_t n, double noise_scale,
                                       uint64_t seed) {
  if (n < 10) throw config_error("generate_pattern: need n >= 10");
  if (noise_scale < 0) throw config_error("generate_pattern: noise_scale must be >= 0");
  auto gen = make_generator(seed);
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto w1 = torch::randn({n, 2}, gen, opts);
  auto fresh = torch::randn({n, 2}, gen, opts);
  auto eps = noise_scale * torch::randn({n, 2}, gen, opts);

  PointCloudPair out;
  out.w1 = w1;
  out.pattern = pattern;
  switch (pattern) {
    case Pattern::independent:
      out.w2 = fresh;
      break;
    case Pattern::linear: {
      const double a = kLinearCoupling;
      auto base = a * (w1.select(1, 0) + w1.select(1, 1)) / std::sqrt(2.0) +
                  std::sqrt(1.0 - a * a) * fresh.select(1, 0);
      out.w2 = torch::stack({base, base}, 1) + eps;
      // the two w2 coordinates are identical before noise; both track the w1 sum
      out.coupled = {{{2, 0}, {2, 1}}, {{1, 0}, {2, 0}}, {{1, 1}, {2, 0}},
                     {{1, 0}, {2, 1}}, {{1, 1}, {2, 1}}};
      break;
    }
    case Pattern::nonlinear_sine:
      out.w2 = torch::sin(M_PI * w1) + eps;
      out.coupled = {{{1, 0}, {2, 0}}, {{1, 1}, {2, 1}}};
      break;
    case Pattern::nonlinear_circle: {
      auto theta = torch::atan2(w1.select(1, 1), w1.select(1, 0));
      out.w2 = torch::stack({torch::cos(theta), torch::sin(theta)}, 1) + eps;
      out.coupled = {{{1, 0}, {2, 0}}, {{1, 1}, {2, 0}}, {{1, 0}, {2, 1}}, {{1, 1}, {2, 1}}};
      break;
    }
    case Pattern::nonlinear_quadratic: {
      QuadQuantizer q;
      out.w2 = q(w1) + eps;
      out.coupled = {{{1, 0}, {2, 0}}, {{1, 1}, {2, 1}}};
      break;
    }
    default:
      throw config_error("generate_pattern: unknown pattern");
  }
  return out;
}

struct TrajectoryPoint {
  int64_t step = 0;
  double measure_value = 0.0;
  double dcor_value = 0.0;
};

struct ToyOptResult {
  std::vector<TrajectoryPoint> trajectory;  // steps + 1 entries; last is post-final-update
  PointCloudPair initial;
  PointCloudPair final_pair;
};

inline double final_dcor(const ToyOptResult& r) { return r.trajectory.back().dcor_value; }

// Treats every point coordinate of both clouds as a free parameter and
// minimizes the configured measure with Adam. The trajectory records the
// measure and the dCor diagnostic at every step (entry `steps` holds the
// final state after the last update).
inline ToyOptResult optimize_points(const PointCloudPair& pair, const ToyOptConfig& config) {
  validate(config);
  dependence::check_pair(pair.w1, pair.w2);
  if (pair.w1.size(1) != 2 || pair.w2.size(1) != 2)
    throw shape_error("optimize_points: clouds must be n x 2");

  auto p = torch::cat({pair.w1, pair.w2}, 1)
               .to(torch::kFloat64)
               .detach()
               .clone()
               .set_requires_grad(true);
  auto adam_opts = torch::optim::AdamOptions(config.learning_rate)
                       .betas({config.beta1, config.beta2})
                       .eps(config.epsilon);
  torch::optim::Adam adam({p}, adam_opts);

  ToyOptResult out;
  out.initial = pair;
  out.trajectory.reserve(static_cast<size_t>(config.steps) + 1);
  for (int64_t step = 0; step <= config.steps; ++step) {
    auto x1 = p.slice(1, 0, 2);
    auto x2 = p.slice(1, 2, 4);
    auto value = dependence::measure_t(config.measure, x1, x2);
    auto diag = dependence::distance_correlation(x1, x2);
    if (step == 0 && config.measure == dependence::Measure::dcor && diag.degenerate)
      throw degenerate_error("optimize_points: measure degenerate at initialization");
    out.trajectory.push_back({step, value.item<double>(), diag.degenerate ? 0.0 : diag.value});
    if (step == config.steps) break;
    adam.zero_grad();
    if (value.requires_grad()) value.backward();
    adam.step();
  }
  out.final_pair.w1 = p.slice(1, 0, 2).detach().clone();
  out.final_pair.w2 = p.slice(1, 2, 4).detach().clone();
  out.final_pair.pattern = pair.pattern;
  out.final_pair.coupled = pair.coupled;
  return out;
}

// Exponentially smoothed series with the decay conventionally tied to a
// window: alpha = 2 / (window + 1).
inline std::vector<double> smoothed_measure(const ToyOptResult& r, int window = 50) {
  std::vector<double> out;
  out.reserve(r.trajectory.size());
  const double alpha = 2.0 / (window + 1.0);
  double ema = 0.0;
  for (size_t i = 0; i < r.trajectory.size(); ++i) {
    ema = i == 0 ? r.trajectory[i].measure_value
                 : alpha * r.trajectory[i].measure_value + (1.0 - alpha) * ema;
    out.push_back(ema);
  }
  return out;
}

}  // namespace latsep::toyopt
