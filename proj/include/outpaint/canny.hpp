#pragma once

#include <cmath>
#include <vector>

#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"

namespace outpaint {

namespace detail {

inline std::vector<float> gaussian_kernel_1d(float sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.f * sigma)));
  std::vector<float> k(2 * radius + 1);
  float sum = 0.f;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5f * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (float& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with edge clamping.
inline ImageTensor gaussian_blur(const ImageTensor& img, float sigma) {
  const auto k = gaussian_kernel_1d(sigma);
  const int radius = static_cast<int>(k.size()) / 2;
  ImageTensor tmp(img.height, img.width, 1), out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float s = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, img.width - 1);
        s += k[i + radius] * img.at(0, y, xx);
      }
      tmp.at(0, y, x) = s;
    }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      float s = 0.f;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, img.height - 1);
        s += k[i + radius] * tmp.at(0, yy, x);
      }
      out.at(0, y, x) = s;
    }
  return out;
}

}  // namespace detail

// Canny: Gaussian smoothing, Sobel gradients, non-maximum suppression,
// double-threshold hysteresis. Thresholds apply to the gradient magnitude
// of a [0,1] image.
inline EdgeMap canny_edges(const ImageTensor& gray, float sigma, float low,
                           float high) {
  if (gray.channels != 1) throw ShapeError("canny_edges expects 1 channel");
  if (!(sigma > 0.f)) throw ConfigError("canny_edges: sigma must be > 0");
  if (!(low >= 0.f && low < high && high <= 1.f))
    throw ConfigError("canny_edges: need 0 <= low < high <= 1");

  const int H = gray.height, W = gray.width;
  ImageTensor sm = detail::gaussian_blur(gray, sigma);

  std::vector<float> gx(static_cast<size_t>(H) * W, 0.f), gy(gx), mag(gx);
  auto S = [&](int y, int x) {
    return sm.at(0, std::clamp(y, 0, H - 1), std::clamp(x, 0, W - 1));
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      gx[i] = (S(y - 1, x + 1) + 2 * S(y, x + 1) + S(y + 1, x + 1)) -
              (S(y - 1, x - 1) + 2 * S(y, x - 1) + S(y + 1, x - 1));
      gy[i] = (S(y + 1, x - 1) + 2 * S(y + 1, x) + S(y + 1, x + 1)) -
              (S(y - 1, x - 1) + 2 * S(y - 1, x) + S(y - 1, x + 1));
      // Sobel response normalized back to the [0,1] gradient scale.
      mag[i] = std::hypot(gx[i], gy[i]) / 4.f;
    }

  // Non-maximum suppression along the quantized gradient direction.
  std::vector<uint8_t> strong(mag.size(), 0), weak(mag.size(), 0);
  auto M = [&](int y, int x) -> float {
    if (y < 0 || y >= H || x < 0 || x >= W) return 0.f;
    return mag[static_cast<size_t>(y) * W + x];
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const size_t i = static_cast<size_t>(y) * W + x;
      if (mag[i] < low) continue;
      const float angle = std::atan2(gy[i], gx[i]);
      const float deg = angle * 180.f / 3.14159265f;
      float a, b;
      const float d = deg < 0 ? deg + 180.f : deg;
      if (d < 22.5f || d >= 157.5f) {
        a = M(y, x - 1); b = M(y, x + 1);
      } else if (d < 67.5f) {
        a = M(y - 1, x + 1); b = M(y + 1, x - 1);
      } else if (d < 112.5f) {
        a = M(y - 1, x); b = M(y + 1, x);
      } else {
        a = M(y - 1, x - 1); b = M(y + 1, x + 1);
      }
      if (mag[i] >= a && mag[i] >= b) {
        if (mag[i] >= high)
          strong[i] = 1;
        else
          weak[i] = 1;
      }
    }

  // Hysteresis: keep weak pixels 8-connected to a strong pixel.
  EdgeMap out(H, W, 0.f);
  std::vector<size_t> stack;
  for (size_t i = 0; i < strong.size(); ++i)
    if (strong[i]) {
      out.data[i] = 1.f;
      stack.push_back(i);
    }
  while (!stack.empty()) {
    const size_t i = stack.back();
    stack.pop_back();
    const int y = static_cast<int>(i / W), x = static_cast<int>(i % W);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
        const size_t j = static_cast<size_t>(ny) * W + nx;
        if (weak[j] && out.data[j] == 0.f) {
          out.data[j] = 1.f;
          stack.push_back(j);
        }
      }
  }
  return out;
}

}  // namespace outpaint
