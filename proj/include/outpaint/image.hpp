#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "outpaint/errors.hpp"

namespace outpaint {

// H x W x C image, channel-major planes (plane 0 first), values in [0,1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;  // size = channels*height*width

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, float fill = 0.f)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return data.size(); }
  bool same_shape(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

// H x W mask over {0,1}; 1 = known pixel, 0 = region to outpaint.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  BinaryMask() = default;
  BinaryMask(int h, int w, float fill = 1.f)
      : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

  float& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

  void validate_binary() const {
    for (float v : data)
      if (v != 0.f && v != 1.f) throw MaskError("mask value not in {0,1}");
  }
};

// Binary edge map; same storage convention as a 1-channel image.
using EdgeMap = BinaryMask;

inline ImageTensor to_grayscale(const ImageTensor& img) {
  if (img.channels != 3) throw ShapeError("to_grayscale expects 3 channels");
  ImageTensor out(img.height, img.width, 1);
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  for (size_t i = 0; i < plane; ++i) {
    out.data[i] = 0.299f * img.data[i] + 0.587f * img.data[plane + i] +
                  0.114f * img.data[2 * plane + i];
  }
  return out;
}

inline ImageTensor apply_mask(const ImageTensor& img, const BinaryMask& mask) {
  if (img.height != mask.height || img.width != mask.width)
    throw ShapeError("apply_mask: spatial shape mismatch");
  ImageTensor out = img;
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c)
    for (size_t i = 0; i < plane; ++i) out.data[c * plane + i] *= mask.data[i];
  return out;
}

// Rightmost floor(ratio*width) columns are 0, the rest 1.
inline BinaryMask make_right_mask(int height, int width, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0))
    throw ConfigError("mask ratio must lie in (0,1)");
  BinaryMask m(height, width, 1.f);
  const int zero_cols = static_cast<int>(std::floor(ratio * width));
  for (int y = 0; y < height; ++y)
    for (int x = width - zero_cols; x < width; ++x) m.at(y, x) = 0.f;
  return m;
}

// X_o = X_gt (.) M + X_pred (.) (1-M), the per-pixel blend used at every stage.
inline ImageTensor compose(const ImageTensor& x_gt, const ImageTensor& x_pred,
                           const BinaryMask& mask) {
  if (!x_gt.same_shape(x_pred) || x_gt.height != mask.height ||
      x_gt.width != mask.width)
    throw ShapeError("compose: shape mismatch");
  mask.validate_binary();
  ImageTensor out(x_gt.height, x_gt.width, x_gt.channels);
  const size_t plane = static_cast<size_t>(x_gt.height) * x_gt.width;
  for (int c = 0; c < x_gt.channels; ++c)
    for (size_t i = 0; i < plane; ++i) {
      const float m = mask.data[i];
      out.data[c * plane + i] =
          x_gt.data[c * plane + i] * m + x_pred.data[c * plane + i] * (1.f - m);
    }
  return out;
}

inline EdgeMap compose_edges(const EdgeMap& gt, const ImageTensor& pred_map,
                             const BinaryMask& mask, float threshold = 0.5f) {
  if (gt.height != pred_map.height || gt.width != pred_map.width ||
      pred_map.channels != 1)
    throw ShapeError("compose_edges: shape mismatch");
  EdgeMap out(gt.height, gt.width);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const float m = mask.data[i];
    const float p = pred_map.data[i] >= threshold ? 1.f : 0.f;
    out.data[i] = gt.data[i] * m + p * (1.f - m);
  }
  return out;
}

}  // namespace outpaint
