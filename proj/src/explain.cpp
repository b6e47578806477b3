#include "pad/explain.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace pad {

Tensor gradcam_pp_raw(const Tensor& activation, const Tensor& grad) {
  if (activation.ndim() != 4 || !activation.same_shape(grad))
    throw ContractError("gradcam_pp_raw: expected matching (1, K, h, w) tensors");
  if (activation.dim(0) != 1) throw ContractError("gradcam_pp_raw: one image at a time");
  const int k = activation.dim(1), h = activation.dim(2), w = activation.dim(3);

  Tensor cam({h, w});
  for (int m = 0; m < k; ++m) {
    double map_sum = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) map_sum += activation.at(0, m, y, x);

    // alpha = g^2 / (2 g^2 + sum(A) g^3), zero where the denominator vanishes
    double weight = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double g = grad.at(0, m, y, x);
        if (g <= 0.0) continue;  // weight uses the positive partials only
        const double g2 = g * g;
        const double denom = 2.0 * g2 + map_sum * g2 * g;
        if (std::abs(denom) < 1e-12) continue;
        weight += (g2 / denom) * g;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        cam.at(y, x) += static_cast<float>(weight) * activation.at(0, m, y, x);
  }
  for (int64_t i = 0; i < cam.numel(); ++i) cam[i] = std::max(0.0f, cam[i]);
  return cam;
}

Tensor upsample_bilinear(const Tensor& grid, int size) {
  if (grid.ndim() != 2) throw ContractError("upsample_bilinear: expected (h, w)");
  cv::Mat src(grid.dim(0), grid.dim(1), CV_32F);
  for (int y = 0; y < grid.dim(0); ++y)
    for (int x = 0; x < grid.dim(1); ++x) src.at<float>(y, x) = grid.at(y, x);
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(size, size), 0, 0, cv::INTER_LINEAR);
  Tensor out({size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(y, x) = dst.at<float>(y, x);
  return out;
}

Tensor normalize_heatmap(Tensor grid) {
  float lo = grid[0], hi = grid[0];
  for (int64_t i = 1; i < grid.numel(); ++i) {
    lo = std::min(lo, grid[i]);
    hi = std::max(hi, grid[i]);
  }
  if (hi - lo < 1e-12f) {
    grid.zero();  // constant map: all zeros rather than dividing by zero
    return grid;
  }
  for (int64_t i = 0; i < grid.numel(); ++i) grid[i] = (grid[i] - lo) / (hi - lo);
  return grid;
}

namespace {

template <typename Model>
Heatmap gradcam_impl(Model& model, const Tensor& image, int target_class,
                     const std::string& layer, bool use_multiclass_head) {
  if (image.ndim() != 4 || image.dim(0) != 1)
    throw ContractError("gradcam_pp: expected a single (1, 3, S, S) image");
  const CamTap tap = model.cam_tap(image, target_class, use_multiclass_head, layer);
  Heatmap heatmap;
  heatmap.target_class = target_class;
  heatmap.source_layer = layer;
  heatmap.values = normalize_heatmap(upsample_bilinear(gradcam_pp_raw(tap.activation, tap.grad),
                                                       image.dim(2)));
  return heatmap;
}

}  // namespace

Heatmap gradcam_pp(PadModel& model, const Tensor& image, int target_class,
                   const std::string& layer, bool use_multiclass_head) {
  return gradcam_impl(model, image, target_class, layer, use_multiclass_head);
}

Heatmap gradcam_pp(UaiModel& model, const Tensor& image, int target_class,
                   const std::string& layer, bool use_multiclass_head) {
  return gradcam_impl(model, image, target_class, layer, use_multiclass_head);
}

std::pair<int, int> heatmap_argmax(const Heatmap& heatmap) {
  const Tensor& v = heatmap.values;
  int best_y = 0, best_x = 0;
  float best = v.at(0, 0);
  for (int y = 0; y < v.dim(0); ++y)
    for (int x = 0; x < v.dim(1); ++x)
      if (v.at(y, x) > best) {
        best = v.at(y, x);
        best_y = y;
        best_x = x;
      }
  return {best_y, best_x};
}

cv::Mat overlay(const Heatmap& heatmap, const cv::Mat& image, double opacity) {
  if (opacity <= 0.0 || opacity >= 1.0) throw ContractError("overlay: opacity must be in (0,1)");
  if (image.type() != CV_8UC3 || image.rows != heatmap.values.dim(0) ||
      image.cols != heatmap.values.dim(1))
    throw ContractError("overlay: image/heatmap shape mismatch");

  cv::Mat heat8(image.rows, image.cols, CV_8U);
  for (int y = 0; y < image.rows; ++y)
    for (int x = 0; x < image.cols; ++x)
      heat8.at<uint8_t>(y, x) =
          cv::saturate_cast<uint8_t>(std::lround(255.0 * heatmap.values.at(y, x)));
  cv::Mat colored;
  cv::applyColorMap(heat8, colored, cv::COLORMAP_JET);

  cv::Mat out(image.size(), CV_8UC3);
  for (int y = 0; y < image.rows; ++y)
    for (int x = 0; x < image.cols; ++x) {
      const cv::Vec3b& a = image.at<cv::Vec3b>(y, x);
      const cv::Vec3b& b = colored.at<cv::Vec3b>(y, x);
      cv::Vec3b& o = out.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c)
        o[c] = cv::saturate_cast<uint8_t>(std::lround((1.0 - opacity) * a[c] + opacity * b[c]));
    }
  return out;
}

void write_explanation(const std::filesystem::path& stem, const cv::Mat& overlay_image,
                       const Heatmap& heatmap, double predicted_prob) {
  const auto png = stem.string() + ".png";
  if (!cv::imwrite(png, overlay_image)) throw IngestionError("failed to write " + png);
  nlohmann::json j;
  j["target_class"] = heatmap.target_class;
  j["layer"] = heatmap.source_layer;
  j["predicted_prob"] = predicted_prob;
  std::ofstream out(stem.string() + ".json");
  if (!out) throw IngestionError("failed to write " + stem.string() + ".json");
  out << j.dump(2) << '\n';
}

}  // namespace pad
