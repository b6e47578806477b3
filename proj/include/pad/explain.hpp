#ifndef PAD_EXPLAIN_HPP_
#define PAD_EXPLAIN_HPP_

#include <opencv2/core.hpp>

#include <filesystem>
#include <string>

#include "pad/model.hpp"

namespace pad {

struct Heatmap {
  Tensor values;  // (H, W), min 0 / max 1 after normalization (all zeros if constant)
  int target_class = 0;
  std::string source_layer;
};

// Per-map weighting from first-, second- and third-order gradient terms of
// the class score, combined over the maps and rectified. Pre-normalization and
// pre-upsampling; activation/grad are a (1, K, h, w) tap.
Tensor gradcam_pp_raw(const Tensor& activation, const Tensor& grad);

// Bilinear upsampling to (size, size) followed by min-max normalization.
Tensor upsample_bilinear(const Tensor& grid, int size);
Tensor normalize_heatmap(Tensor grid);

// Full pipeline on a single image tensor (1, 3, S, S).
Heatmap gradcam_pp(PadModel& model, const Tensor& image, int target_class,
                   const std::string& layer, bool use_multiclass_head = false);
Heatmap gradcam_pp(UaiModel& model, const Tensor& image, int target_class,
                   const std::string& layer, bool use_multiclass_head = false);

// (row, col) of the heatmap maximum, first occurrence in row-major order.
std::pair<int, int> heatmap_argmax(const Heatmap& heatmap);

// Color-mapped heatmap alpha-blended onto the image (8UC3, same size).
cv::Mat overlay(const Heatmap& heatmap, const cv::Mat& image, double opacity);

// Writes <stem>.png and a <stem>.json sidecar (target class, layer, predicted
// probability).
void write_explanation(const std::filesystem::path& stem, const cv::Mat& overlay_image,
                       const Heatmap& heatmap, double predicted_prob);

}  // namespace pad

#endif  // PAD_EXPLAIN_HPP_
