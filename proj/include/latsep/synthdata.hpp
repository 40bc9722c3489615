#pragma once

// Procedurally confounded fundus-like dataset with known ground-truth
// factors. Camera effects are strictly multiplicative (tint, vignette,
// brightness, all gains <= 1) so a camera change never moves structure:
// the per-pixel ratio between two camera renders is a smooth field.

#include <torch/torch.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "latsep/common.hpp"
#include "json.hpp"

namespace latsep::synthdata {

struct FactorVector {
  int attribute_class = 0;
  int camera_class = 0;
  int64_t identity_seed = 0;
  // per-sample appearance jitter: disc x, disc y, vessel fan, pigmentation
  // hue, texture amplitude, tint balance, vignette, brightness. The last
  // five blur the class prototypes so that factor decoding has a realistic
  // noise floor instead of being pixel-exact.
  std::vector<double> continuous_nuisance{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
};

struct ConfoundSpec {
  double correlation_strength = 0.0;  // P(camera deterministically implied by attribute)
  std::vector<double> attribute_priors{1.0 / 3, 1.0 / 3, 1.0 / 3};
  int camera_cardinality = 5;

  int attribute_cardinality() const { return static_cast<int>(attribute_priors.size()); }
  void validate() const {
    if (correlation_strength < 0.0 || correlation_strength > 1.0)
      throw config_error("confound: correlation_strength must lie in [0,1]");
    if (attribute_priors.size() < 2) throw config_error("confound: need >= 2 attribute classes");
    if (camera_cardinality < 2) throw config_error("confound: need >= 2 camera classes");
    double total = 0.0;
    for (double p : attribute_priors) {
      if (p < 0.0) throw config_error("confound: negative prior");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw config_error("confound: priors must sum to 1");
  }
};

struct LabeledImageBatch {
  torch::Tensor images;           // n x 3 x H x W, float32 in [0,1]
  torch::Tensor attribute_labels; // n, int64
  torch::Tensor camera_labels;    // n, int64
  torch::Tensor identity_keys;    // n, int64
};

inline void check_resolution(int resolution) {
  if (resolution != 32 && resolution != 64 && resolution != 128 && resolution != 256)
    throw config_error("unsupported resolution " + std::to_string(resolution) +
                       " (expected 32/64/128/256)");
}

namespace detail {

// deterministic per-class camera gains, all <= 1 so the multiplicative
// model never clips
struct CameraParams {
  double tint_r, tint_g, tint_b;
  double vignette;    // strength of the radial falloff
  double brightness;
};

inline CameraParams camera_params(int camera_class) {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ull ^ (static_cast<uint64_t>(camera_class) * 0x2545f491ull));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CameraParams p;
  p.tint_r = 1.0 - 0.18 * u(rng);
  p.tint_g = 1.0 - 0.18 * u(rng);
  p.tint_b = 1.0 - 0.18 * u(rng);
  // Vignette and brightness are spread deterministically so every camera
  // class has a pigmentation-independent luminance signature: the tint is
  // multiplicative on the attribute's hue band, and if the tint were the
  // only class cue a camera readout would be forced to model the hue too,
  // making the two factors inseparable by construction.
  p.vignette = 0.08 + 0.07 * (camera_class % 5);
  p.brightness = 0.98 - 0.05 * ((camera_class + 2) % 5);
  return p;
}

struct AttributeParams {
  cv::Scalar base_bgr;      // pigmentation band
  double texture_freq;      // reflectivity texture
  double texture_amp;
};

inline AttributeParams attribute_params(int attribute_class, double hue_jitter = 0.0,
                                        double amp_jitter = 0.0) {
  // hue band shifts with the class; saturation/value fixed
  double hue = 8.0 + 9.0 * attribute_class + hue_jitter;  // degrees, orange-red band
  cv::Mat hsv(1, 1, CV_32FC3, cv::Scalar(hue, 0.80, 0.55));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  auto v = bgr.at<cv::Vec3f>(0, 0);
  // equalize perceived luminance across the hue band so the pigmentation
  // class is a purely chromatic cue; otherwise a luminance-profile camera
  // readout would carry an attribute trace by construction
  double lum = 0.114 * v[0] + 0.587 * v[1] + 0.299 * v[2];
  double scale = 0.31 / std::max(lum, 1e-6);
  AttributeParams p;
  p.base_bgr = cv::Scalar(v[0] * scale, v[1] * scale, v[2] * scale);
  // texture is deliberately class-independent: the attribute must live in
  // the pigmentation hue alone, so a luminance-profile camera readout has
  // no attribute trace to piggyback on
  p.texture_freq = 6.5;
  p.texture_amp = std::max(0.0, 0.12 + amp_jitter);
  return p;
}

inline void draw_vessel(cv::Mat& img, cv::Point2d from, double angle, double length,
                        double width, int depth, std::mt19937_64& rng, double res) {
  if (depth <= 0 || length < 0.01) return;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cv::Point2d to(from.x + length * std::cos(angle), from.y + length * std::sin(angle));
  cv::line(img, cv::Point2d(from.x * res, from.y * res), cv::Point2d(to.x * res, to.y * res),
           cv::Scalar(0.02, 0.03, 0.22), std::max(1, static_cast<int>(std::lround(width * res))),
           cv::LINE_AA);
  double spread = 0.55 + 0.15 * u(rng);
  draw_vessel(img, to, angle + spread * (0.6 + 0.2 * u(rng)), length * (0.72 + 0.06 * u(rng)),
              width * 0.8, depth - 1, rng, res);
  draw_vessel(img, to, angle - spread * (0.6 + 0.2 * u(rng)), length * (0.72 + 0.06 * u(rng)),
              width * 0.8, depth - 1, rng, res);
}

inline cv::Mat tensor_to_bgr8(const torch::Tensor& image) {
  auto img = image.detach().to(torch::kFloat32).clamp(0, 1).contiguous();
  if (img.dim() != 3 || img.size(0) != 3) throw shape_error("expected a 3 x H x W image tensor");
  const int h = static_cast<int>(img.size(1));
  const int w = static_cast<int>(img.size(2));
  cv::Mat out(h, w, CV_8UC3);
  auto acc = img.accessor<float, 3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<uchar>(std::lround(acc[2][y][x] * 255.0)),
                                          static_cast<uchar>(std::lround(acc[1][y][x] * 255.0)),
                                          static_cast<uchar>(std::lround(acc[0][y][x] * 255.0)));
    }
  return out;
}

inline torch::Tensor bgr8_to_tensor(const cv::Mat& bgr) {
  cv::Mat img;
  bgr.convertTo(img, CV_32FC3, 1.0 / 255.0);
  auto out = torch::zeros({3, img.rows, img.cols}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  for (int y = 0; y < img.rows; ++y)
    for (int x = 0; x < img.cols; ++x) {
      auto v = img.at<cv::Vec3f>(y, x);
      acc[0][y][x] = v[2];
      acc[1][y][x] = v[1];
      acc[2][y][x] = v[0];
    }
  return out;
}

inline torch::Tensor mat32f_to_tensor(const cv::Mat& bgr32) {
  auto out = torch::zeros({3, bgr32.rows, bgr32.cols}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  for (int y = 0; y < bgr32.rows; ++y)
    for (int x = 0; x < bgr32.cols; ++x) {
      auto v = bgr32.at<cv::Vec3f>(y, x);
      acc[0][y][x] = v[2];
      acc[1][y][x] = v[1];
      acc[2][y][x] = v[0];
    }
  return out;
}

}  // namespace detail

// Deterministic render: attribute -> pigmentation hue band + reflectivity
// texture; camera -> multiplicative tint/vignette/brightness; identity ->
// recursive vessel tree + optic disc, always anchored on the left.
inline torch::Tensor render_image(const FactorVector& factors, int resolution) {
  check_resolution(resolution);
  if (factors.attribute_class < 0 || factors.camera_class < 0)
    throw config_error("render_image: negative class index");
  const double res = resolution;
  auto nj = [&](size_t i) {
    return factors.continuous_nuisance.size() > i ? factors.continuous_nuisance[i] : 0.0;
  };
  const double nj0 = nj(0), nj1 = nj(1), nj2 = nj(2);
  auto attr = detail::attribute_params(factors.attribute_class, 6.0 * nj(3),
                                       0.02 * nj(4));
  auto cam = detail::camera_params(factors.camera_class);
  // per-sample camera wobble around the class prototype; all factors stay
  // in (0,1] so the multiplicative model still never clips
  const double balance = 0.07 * nj(5);
  cam.tint_r *= std::clamp(1.0 - std::max(0.0, balance), 0.5, 1.0);
  cam.tint_b *= std::clamp(1.0 - std::max(0.0, -balance), 0.5, 1.0);
  cam.vignette = std::clamp(cam.vignette + 0.04 * nj(6), 0.02, 0.5);
  cam.brightness *= std::clamp(1.0 - 0.05 * std::abs(nj(7)), 0.7, 1.0);

  cv::Mat scene(resolution, resolution, CV_32FC3, attr.base_bgr);

  std::mt19937_64 idrng(static_cast<uint64_t>(factors.identity_seed) * 0x9e3779b97f4a7c15ull + 1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  // reflectivity texture: frequency/amplitude set by the attribute, phase
  // by identity
  const double phase = u(idrng) * M_PI;
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      double fx = x / res, fy = y / res;
      double m = 1.0 + attr.texture_amp *
                           std::sin(attr.texture_freq * 2 * M_PI * fx + phase) *
                           std::sin(attr.texture_freq * 2 * M_PI * fy + phase * 0.7);
      scene.at<cv::Vec3f>(y, x) *= static_cast<float>(m);
    }

  // optic disc on the left, with per-sample jitter
  const cv::Point2d disc(0.30 + 0.02 * u(idrng) + 0.02 * nj0,
                         0.50 + 0.04 * u(idrng) + 0.02 * nj1);
  cv::circle(scene, cv::Point2d(disc.x * res, disc.y * res),
             static_cast<int>(0.085 * res), cv::Scalar(0.55, 0.82, 0.95), cv::FILLED,
             cv::LINE_AA);

  // identity-specific recursive vessel tree fanning out of the disc
  const int branches = 5;
  for (int b = 0; b < branches; ++b) {
    double fan = (b - (branches - 1) / 2.0) / branches;
    double angle = fan * 2.4 + 0.25 * u(idrng) + 0.1 * nj2;
    detail::draw_vessel(scene, disc, angle, 0.16 + 0.04 * u(idrng), 0.022 + 0.006 * u(idrng),
                        5, idrng, res);
  }

  cv::GaussianBlur(scene, scene, cv::Size(3, 3), 0.6);
  cv::min(scene, 1.0f, scene);
  cv::max(scene, 0.0f, scene);

  // purely multiplicative camera model
  const cv::Point2d center(0.5, 0.5);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      double rx = x / res - center.x, ry = y / res - center.y;
      double r2 = (rx * rx + ry * ry) / (0.47 * 0.47);
      double g = cam.brightness * (1.0 - cam.vignette * std::min(1.0, r2));
      auto& v = scene.at<cv::Vec3f>(y, x);
      v[0] = static_cast<float>(v[0] * g * cam.tint_b);
      v[1] = static_cast<float>(v[1] * g * cam.tint_g);
      v[2] = static_cast<float>(v[2] * g * cam.tint_r);
    }

  // hard circular mask last: background is exactly 0
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x) {
      double rx = x / res - center.x, ry = y / res - center.y;
      if (rx * rx + ry * ry > 0.47 * 0.47) scene.at<cv::Vec3f>(y, x) = cv::Vec3f(0, 0, 0);
    }

  return detail::mat32f_to_tensor(scene);
}

struct SampledDataset {
  LabeledImageBatch batch;
  std::vector<FactorVector> factors;
};

// Draws factors with the single-knob confound: with probability
// correlation_strength the camera class is attribute % C_c, otherwise
// uniform. Identities are recycled from a pool so they can be split.
inline SampledDataset sample_dataset(int64_t n, const ConfoundSpec& confound, int resolution,
                                     uint64_t seed, int64_t n_identities = 0) {
  confound.validate();
  check_resolution(resolution);
  if (n < 100) throw config_error("sample_dataset: need n >= 100");
  if (n_identities <= 0) n_identities = std::max<int64_t>(10, n / 8);

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> attr_dist(confound.attribute_priors.begin(),
                                            confound.attribute_priors.end());
  std::uniform_int_distribution<int> cam_dist(0, confound.camera_cardinality - 1);
  std::uniform_int_distribution<int64_t> id_dist(0, n_identities - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.5);

  SampledDataset out;
  out.factors.reserve(n);
  auto images = torch::zeros({n, 3, resolution, resolution}, torch::kFloat32);
  auto attr_labels = torch::zeros({n}, torch::kInt64);
  auto cam_labels = torch::zeros({n}, torch::kInt64);
  auto ids = torch::zeros({n}, torch::kInt64);
  // identity pool gets globally unique seeds derived from the dataset seed
  const uint64_t pool_base = fnv1a64(std::to_string(seed));

  for (int64_t i = 0; i < n; ++i) {
    FactorVector f;
    f.attribute_class = attr_dist(rng);
    f.camera_class = coin(rng) < confound.correlation_strength
                         ? f.attribute_class % confound.camera_cardinality
                         : cam_dist(rng);
    f.identity_seed = static_cast<int64_t>((pool_base + static_cast<uint64_t>(id_dist(rng))) &
                                           0x7fffffffffffffffull);
    f.continuous_nuisance = {jitter(rng), jitter(rng), jitter(rng), jitter(rng),
                             jitter(rng), jitter(rng), jitter(rng), jitter(rng)};
    images[i] = render_image(f, resolution);
    attr_labels[i] = f.attribute_class;
    cam_labels[i] = f.camera_class;
    ids[i] = f.identity_seed;
    out.factors.push_back(std::move(f));
  }
  out.batch = {images, attr_labels, cam_labels, ids};
  return out;
}

struct SplitIndices {
  std::vector<int64_t> train, val, test;
};

// 60/20/20 partition by identity: an identity never straddles splits.
inline SplitIndices split_by_identity(const std::vector<FactorVector>& factors, uint64_t seed) {
  std::vector<int64_t> unique_ids;
  for (const auto& f : factors) unique_ids.push_back(f.identity_seed);
  std::sort(unique_ids.begin(), unique_ids.end());
  unique_ids.erase(std::unique(unique_ids.begin(), unique_ids.end()), unique_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(unique_ids.begin(), unique_ids.end(), rng);
  const size_t n_train = static_cast<size_t>(unique_ids.size() * 0.6);
  const size_t n_val = static_cast<size_t>(unique_ids.size() * 0.2);
  std::map<int64_t, int> bucket;
  for (size_t i = 0; i < unique_ids.size(); ++i)
    bucket[unique_ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  SplitIndices out;
  for (size_t i = 0; i < factors.size(); ++i) {
    switch (bucket[factors[i].identity_seed]) {
      case 0: out.train.push_back(i); break;
      case 1: out.val.push_back(i); break;
      default: out.test.push_back(i); break;
    }
  }
  return out;
}

inline LabeledImageBatch select(const LabeledImageBatch& b, const std::vector<int64_t>& idx) {
  auto index = torch::tensor(idx, torch::kInt64);
  return {b.images.index_select(0, index), b.attribute_labels.index_select(0, index),
          b.camera_labels.index_select(0, index), b.identity_keys.index_select(0, index)};
}

// Tight circle crop + resize + circular mask + left-disc orientation.
// Throws data_error when no bright circular region is detectable.
inline torch::Tensor preprocess_external(const torch::Tensor& image, int target_resolution) {
  check_resolution(target_resolution);
  cv::Mat bgr = detail::tensor_to_bgr8(image);
  cv::Mat gray;
  cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
  cv::Mat bin;
  cv::threshold(gray, bin, 10, 255, cv::THRESH_BINARY);
  std::vector<std::vector<cv::Point>> contours;
  cv::findContours(bin, contours, cv::RETR_EXTERNAL, cv::CHAIN_APPROX_SIMPLE);
  double best_area = 0.0;
  cv::Point2f center;
  float radius = 0.0f;
  for (const auto& c : contours) {
    cv::Point2f ctr;
    float r;
    cv::minEnclosingCircle(c, ctr, r);
    double area = cv::contourArea(c);
    if (r > 4 && area > best_area && area > 0.5 * M_PI * r * r) {
      best_area = area;
      center = ctr;
      radius = r;
    }
  }
  if (best_area <= 0.0)
    throw data_error("preprocess_external: no bright circular region detected");

  // tight square crop around the circle, zero-padded at borders
  const int side = static_cast<int>(std::ceil(2 * radius));
  cv::Mat crop = cv::Mat::zeros(side, side, CV_8UC3);
  cv::Rect src(static_cast<int>(center.x - radius), static_cast<int>(center.y - radius), side,
               side);
  cv::Rect clipped = src & cv::Rect(0, 0, bgr.cols, bgr.rows);
  if (clipped.area() > 0)
    bgr(clipped).copyTo(crop(cv::Rect(clipped.x - src.x, clipped.y - src.y, clipped.width,
                                      clipped.height)));
  cv::Mat resized;
  cv::resize(crop, resized, cv::Size(target_resolution, target_resolution), 0, 0,
             cv::INTER_AREA);

  // uniform circular mask
  const double res = target_resolution;
  for (int y = 0; y < target_resolution; ++y)
    for (int x = 0; x < target_resolution; ++x) {
      double rx = x / res - 0.5, ry = y / res - 0.5;
      if (rx * rx + ry * ry > 0.47 * 0.47) resized.at<cv::Vec3b>(y, x) = cv::Vec3b(0, 0, 0);
    }

  // optic-disc side heuristic: centroid of the brightest decile; flip so
  // the disc ends up on the left
  cv::Mat g2;
  cv::cvtColor(resized, g2, cv::COLOR_BGR2GRAY);
  double minv, maxv;
  cv::minMaxLoc(g2, &minv, &maxv);
  cv::Mat bright;
  cv::threshold(g2, bright, 0.85 * maxv, 255, cv::THRESH_BINARY);
  auto m = cv::moments(bright, true);
  if (m.m00 > 0 && m.m10 / m.m00 > target_resolution / 2.0)
    cv::flip(resized, resized, 1);

  return detail::bgr8_to_tensor(resized);
}

// --- disk format: PNG per image, JSONL manifest per split -----------------

inline void save_dataset(const std::filesystem::path& dir, const SampledDataset& data,
                         const SplitIndices& splits) {
  namespace fs = std::filesystem;
  const std::pair<const char*, const std::vector<int64_t>*> parts[] = {
      {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
  for (const auto& [name, idx] : parts) {
    fs::create_directories(dir / name);
    std::ofstream manifest(dir / name / "manifest.jsonl");
    for (int64_t i : *idx) {
      std::string fname = "img_" + std::to_string(i) + ".png";
      cv::imwrite((dir / name / fname).string(),
                  detail::tensor_to_bgr8(data.batch.images[i]));
      nlohmann::json line = {
          {"filename", fname},
          {"attribute_class", data.factors[i].attribute_class},
          {"camera_class", data.factors[i].camera_class},
          {"identity_key", data.factors[i].identity_seed},
      };
      manifest << line.dump() << "\n";
    }
  }
}

inline LabeledImageBatch load_split(const std::filesystem::path& split_dir) {
  std::ifstream manifest(split_dir / "manifest.jsonl");
  if (!manifest) throw data_error("load_split: missing manifest in " + split_dir.string());
  std::vector<torch::Tensor> images;
  std::vector<int64_t> attrs, cams, ids;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    cv::Mat bgr = cv::imread((split_dir / j.at("filename").get<std::string>()).string(),
                             cv::IMREAD_COLOR);
    if (bgr.empty()) throw data_error("load_split: unreadable image " +
                                      j.at("filename").get<std::string>());
    images.push_back(detail::bgr8_to_tensor(bgr));
    attrs.push_back(j.at("attribute_class").get<int64_t>());
    cams.push_back(j.at("camera_class").get<int64_t>());
    ids.push_back(j.at("identity_key").get<int64_t>());
  }
  if (images.empty()) throw data_error("load_split: empty manifest in " + split_dir.string());
  return {torch::stack(images), torch::tensor(attrs, torch::kInt64),
          torch::tensor(cams, torch::kInt64), torch::tensor(ids, torch::kInt64)};
}

}  // namespace latsep::synthdata
