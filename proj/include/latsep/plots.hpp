#pragma once

// Static PNG rendering for reports: matrix heatmaps with cell annotations,
// scatter-matrix pair plots, and padded image grids. All OpenCV, no UI.

#include <torch/torch.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "latsep/common.hpp"
#include "latsep/synthdata.hpp"

namespace latsep::plots {

inline void save_image_png(const torch::Tensor& image, const std::string& path) {
  if (!cv::imwrite(path, synthdata::detail::tensor_to_bgr8(image)))
    throw data_error("save_image_png: could not write " + path);
}

// images: (N, 3, H, W) in [0,1] -> one (3, H', W') canvas with `columns`
// tiles per row and 2px separators
inline torch::Tensor image_grid(const torch::Tensor& images, int64_t columns) {
  if (images.dim() != 4 || images.size(1) != 3)
    throw shape_error("image_grid: expected (N,3,H,W)");
  if (columns < 1) throw config_error("image_grid: columns must be >= 1");
  const int64_t n = images.size(0), h = images.size(2), w = images.size(3);
  const int64_t rows = (n + columns - 1) / columns, pad = 2;
  auto canvas = torch::ones({3, rows * (h + pad) - pad, columns * (w + pad) - pad},
                            images.options());
  for (int64_t i = 0; i < n; ++i) {
    int64_t r = i / columns, c = i % columns;
    canvas.slice(1, r * (h + pad), r * (h + pad) + h)
        .slice(2, c * (w + pad), c * (w + pad) + w) = images[i];
  }
  return canvas;
}

namespace detail {

// blue (negative) -> white (zero) -> red (positive)
inline cv::Vec3b diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  if (t >= 0) {
    auto f = 1.0 - t;
    return {static_cast<uint8_t>(255 * f * 0.85 + 38), static_cast<uint8_t>(255 * f),
            255};
  }
  auto f = 1.0 + t;
  return {255, static_cast<uint8_t>(255 * f), static_cast<uint8_t>(255 * f * 0.85 + 38)};
}

inline std::string cell_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), std::abs(v) < 10 ? "%.2f" : "%.1f", v);
  return buf;
}

}  // namespace detail

// Annotated heatmap of a (rows x cols) matrix; color range symmetric around
// 0 unless the matrix is all-nonnegative, then [0, max].
inline void heatmap_png(const torch::Tensor& matrix, const std::vector<std::string>& row_names,
                        const std::vector<std::string>& col_names, const std::string& path,
                        const std::string& title = "") {
  auto m = matrix.to(torch::kFloat64).contiguous();
  if (m.dim() != 2) throw shape_error("heatmap_png: expected a matrix");
  const int64_t rows = m.size(0), cols = m.size(1);
  if (row_names.size() != static_cast<size_t>(rows) ||
      col_names.size() != static_cast<size_t>(cols))
    throw config_error("heatmap_png: label counts must match the matrix");
  const int cell = 72, left = 110, top = title.empty() ? 34 : 62;
  cv::Mat img(top + cell * rows + 8, left + cell * cols + 8, CV_8UC3,
              cv::Scalar(255, 255, 255));
  double lo = m.min().item<double>();
  double scale = std::max(1e-12, m.abs().max().item<double>());
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) {
      double v = m[r][c].item<double>();
      double t = lo >= 0 ? v / scale : v / scale;  // symmetric map either way
      cv::Rect rect(left + c * cell, top + r * cell, cell - 2, cell - 2);
      cv::rectangle(img, rect, detail::diverging_color(t), cv::FILLED);
      cv::putText(img, detail::cell_text(v),
                  {rect.x + 8, rect.y + cell / 2 + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                  cv::Scalar(20, 20, 20), 1, cv::LINE_AA);
    }
  for (int64_t r = 0; r < rows; ++r)
    cv::putText(img, row_names[r], {6, top + static_cast<int>(r) * cell + cell / 2 + 5},
                cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  for (int64_t c = 0; c < cols; ++c)
    cv::putText(img, col_names[c], {left + static_cast<int>(c) * cell + 4, top - 8},
                cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  if (!title.empty())
    cv::putText(img, title, {6, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.55, cv::Scalar(0, 0, 0),
                1, cv::LINE_AA);
  if (!cv::imwrite(path, img)) throw data_error("heatmap_png: could not write " + path);
}

// Scatter matrix over the columns of points (n x d): panel (i,j) plots
// coordinate j against coordinate i.
inline void scatter_matrix_png(const torch::Tensor& points,
                               const std::vector<std::string>& names,
                               const std::string& path, const std::string& title = "") {
  auto p = points.to(torch::kFloat64).contiguous();
  if (p.dim() != 2) throw shape_error("scatter_matrix_png: expected (n, d) points");
  const int64_t n = p.size(0), d = p.size(1);
  if (names.size() != static_cast<size_t>(d))
    throw config_error("scatter_matrix_png: need one name per coordinate");
  const int panel = 150, margin = 26, top = title.empty() ? 30 : 56;
  cv::Mat img(top + static_cast<int>(d) * panel + 8,
              margin + static_cast<int>(d) * panel + 8, CV_8UC3,
              cv::Scalar(255, 255, 255));
  auto mins = std::get<0>(p.min(0)), maxs = std::get<0>(p.max(0));
  auto span = (maxs - mins).clamp_min(1e-12);
  for (int64_t i = 0; i < d; ++i)
    for (int64_t j = 0; j < d; ++j) {
      cv::Rect rect(margin + static_cast<int>(j) * panel + 4,
                    top + static_cast<int>(i) * panel + 4, panel - 8, panel - 8);
      cv::rectangle(img, rect, cv::Scalar(150, 150, 150), 1);
      auto x = ((p.select(1, j) - mins[j]) / span[j]).contiguous();
      auto y = ((p.select(1, i) - mins[i]) / span[i]).contiguous();
      for (int64_t s = 0; s < n; ++s) {
        int px = rect.x + 2 + static_cast<int>(x[s].item<double>() * (rect.width - 4));
        int py = rect.y + rect.height - 2 -
                 static_cast<int>(y[s].item<double>() * (rect.height - 4));
        cv::circle(img, {px, py}, 1, cv::Scalar(160, 80, 20), cv::FILLED, cv::LINE_AA);
      }
      if (i == d - 1)
        cv::putText(img, names[j], {rect.x + 4, rect.y + rect.height + 16},
                    cv::FONT_HERSHEY_SIMPLEX, 0.38, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
      if (j == 0)
        cv::putText(img, names[i], {2, rect.y + rect.height / 2},
                    cv::FONT_HERSHEY_SIMPLEX, 0.38, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
  if (!title.empty())
    cv::putText(img, title, {6, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.55, cv::Scalar(0, 0, 0),
                1, cv::LINE_AA);
  if (!cv::imwrite(path, img))
    throw data_error("scatter_matrix_png: could not write " + path);
}

}  // namespace latsep::plots
