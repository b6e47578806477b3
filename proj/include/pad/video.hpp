#ifndef PAD_VIDEO_HPP_
#define PAD_VIDEO_HPP_

#include <opencv2/core.hpp>

#include <functional>
#include <string>
#include <vector>

#include "pad/error.hpp"

namespace pad {

struct FaceBox {
  cv::Rect box;
  float confidence = 0.0f;
};

// Pluggable face detector. The paper-scale pipeline would plug an external
// detector here; the bundled default knows the synthetic face layout.
class FaceDetector {
 public:
  virtual ~FaceDetector() = default;
  virtual std::vector<FaceBox> detect(const cv::Mat& image) const = 0;
};

// Returns the central box covering side_fraction of each dimension; matches
// the synthetic generator's face region at the default fraction.
class CenterBoxDetector : public FaceDetector {
 public:
  explicit CenterBoxDetector(double side_fraction = 0.5) : side_fraction_(side_fraction) {}
  std::vector<FaceBox> detect(const cv::Mat& image) const override;

 private:
  double side_fraction_;
};

// Crop of the highest-confidence detection. Throws NoFaceError when the
// detector finds nothing; callers decide whether to skip or abort.
cv::Mat crop_face(const cv::Mat& image, const FaceDetector& detector);

struct ExtractedFrame {
  int frame_index = 0;  // original frame number in the video
  cv::Mat image;
};

// Decodes a video (or a directory of ordered image files) and returns frames
// at the given stride: indices 0, stride, 2*stride, ...
std::vector<ExtractedFrame> extract_frames(const std::string& path, int stride);

// Streaming variant used by the CLI so long videos never sit in memory.
void for_each_frame(const std::string& path, int stride,
                    const std::function<void(const ExtractedFrame&)>& fn);

}  // namespace pad

#endif  // PAD_VIDEO_HPP_
