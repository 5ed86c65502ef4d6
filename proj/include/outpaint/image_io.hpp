#pragma once

#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"

namespace outpaint {

namespace detail {

// Bilinear resample with half-pixel centers (align_corners=false convention).
inline ImageTensor resize_bilinear(const ImageTensor& src, int out_h, int out_w) {
  ImageTensor dst(out_h, out_w, src.channels);
  const float sy = static_cast<float>(src.height) / out_h;
  const float sx = static_cast<float>(src.width) / out_w;
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < out_h; ++y) {
      float fy = (y + 0.5f) * sy - 0.5f;
      fy = std::clamp(fy, 0.f, static_cast<float>(src.height - 1));
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const float wy = fy - y0;
      for (int x = 0; x < out_w; ++x) {
        float fx = (x + 0.5f) * sx - 0.5f;
        fx = std::clamp(fx, 0.f, static_cast<float>(src.width - 1));
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, src.width - 1);
        const float wx = fx - x0;
        const float top = src.at(c, y0, x0) * (1 - wx) + src.at(c, y0, x1) * wx;
        const float bot = src.at(c, y1, x0) * (1 - wx) + src.at(c, y1, x1) * wx;
        dst.at(c, y, x) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return dst;
}

inline ImageTensor center_crop_square(const ImageTensor& src) {
  const int side = std::min(src.height, src.width);
  const int y0 = (src.height - side) / 2;
  const int x0 = (src.width - side) / 2;
  ImageTensor dst(side, side, src.channels);
  for (int c = 0; c < src.channels; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        dst.at(c, y, x) = src.at(c, y0 + y, x0 + x);
  return dst;
}

inline ImageTensor from_cv(const cv::Mat& bgr) {
  ImageTensor out(bgr.rows, bgr.cols, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(0, y, x) = row[x][2] / 255.f;  // R
      out.at(1, y, x) = row[x][1] / 255.f;  // G
      out.at(2, y, x) = row[x][0] / 255.f;  // B
    }
  }
  return out;
}

}  // namespace detail

// Decodes PNG/JPEG, center-crops to square, resizes bilinearly to side x side.
inline ImageTensor load_image(const std::string& path, int side) {
  if (side < 8) throw IngestError("load_image: side must be >= 8");
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IngestError("load_image: cannot decode " + path);
  ImageTensor img = detail::center_crop_square(detail::from_cv(bgr));
  if (img.height < 8) throw IngestError("load_image: image too small " + path);
  return detail::resize_bilinear(img, side, side);
}

inline void save_png(const std::string& path, const ImageTensor& img) {
  cv::Mat mat(img.height, img.width, img.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto q = [&](int c) {
        return static_cast<uint8_t>(
            std::lround(std::clamp(img.at(c, y, x), 0.f, 1.f) * 255.f));
      };
      if (img.channels == 3)
        mat.at<cv::Vec3b>(y, x) = {q(2), q(1), q(0)};
      else
        mat.at<uint8_t>(y, x) = q(0);
    }
  if (!cv::imwrite(path, mat))
    throw IngestError("save_png: cannot write " + path);
}

inline void save_png(const std::string& path, const BinaryMask& m) {
  ImageTensor img(m.height, m.width, 1);
  img.data = m.data;
  save_png(path, img);
}

inline ImageTensor load_png_raw(const std::string& path) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IngestError("load_png_raw: cannot decode " + path);
  return detail::from_cv(bgr);
}

inline BinaryMask load_png_binary(const std::string& path) {
  cv::Mat g = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw IngestError("load_png_binary: cannot decode " + path);
  BinaryMask m(g.rows, g.cols);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x)
      m.at(y, x) = g.at<uint8_t>(y, x) >= 128 ? 1.f : 0.f;
  return m;
}

inline ImageTensor load_png_gray(const std::string& path) {
  cv::Mat g = cv::imread(path, cv::IMREAD_GRAYSCALE);
  if (g.empty()) throw IngestError("load_png_gray: cannot decode " + path);
  ImageTensor img(g.rows, g.cols, 1);
  for (int y = 0; y < g.rows; ++y)
    for (int x = 0; x < g.cols; ++x) img.at(0, y, x) = g.at<uint8_t>(y, x) / 255.f;
  return img;
}

}  // namespace outpaint
