#include "pad/video.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>

#include <algorithm>
#include <filesystem>

namespace pad {

std::vector<FaceBox> CenterBoxDetector::detect(const cv::Mat& image) const {
  const int w = static_cast<int>(image.cols * side_fraction_);
  const int h = static_cast<int>(image.rows * side_fraction_);
  if (w < 1 || h < 1) return {};
  return {{cv::Rect((image.cols - w) / 2, (image.rows - h) / 2, w, h), 1.0f}};
}

cv::Mat crop_face(const cv::Mat& image, const FaceDetector& detector) {
  const auto detections = detector.detect(image);
  if (detections.empty()) throw NoFaceError("no face detected");
  const auto best = std::max_element(
      detections.begin(), detections.end(),
      [](const FaceBox& a, const FaceBox& b) { return a.confidence < b.confidence; });
  const cv::Rect clipped = best->box & cv::Rect(0, 0, image.cols, image.rows);
  if (clipped.empty()) throw NoFaceError("face box outside the image");
  return image(clipped).clone();
}

void for_each_frame(const std::string& path, int stride,
                    const std::function<void(const ExtractedFrame&)>& fn) {
  if (stride < 1) throw ContractError("extract_frames: stride must be >= 1");

  if (std::filesystem::is_directory(path)) {
    // a directory of pre-extracted frames, in filename order
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IngestionError("no frames in directory: " + path);
    int index = 0;
    for (const auto& file : files) {
      if (index % stride == 0) {
        cv::Mat img = cv::imread(file.string(), cv::IMREAD_COLOR);
        if (img.empty()) throw IngestionError("cannot decode frame: " + file.string());
        fn({index, img});
      }
      ++index;
    }
    return;
  }

  cv::VideoCapture cap(path);
  if (!cap.isOpened()) throw IngestionError("cannot decode video: " + path);
  cv::Mat frame;
  int index = 0;
  bool any = false;
  while (cap.read(frame)) {
    if (index % stride == 0) {
      fn({index, frame.clone()});
      any = true;
    }
    ++index;
  }
  if (!any) throw IngestionError("cannot decode video: " + path);
}

std::vector<ExtractedFrame> extract_frames(const std::string& path, int stride) {
  std::vector<ExtractedFrame> frames;
  for_each_frame(path, stride, [&](const ExtractedFrame& f) { frames.push_back(f); });
  return frames;
}

}  // namespace pad
