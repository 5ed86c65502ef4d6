#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "outpaint/image.hpp"

namespace outpaint {

// Procedural landscape-like image: sky gradient, sun, layered ridges and a
// textured foreground. Deterministic per (seed, index); used for demo and
// smoke corpora where no photo dataset is bundled.
inline ImageTensor synth_landscape(int side, uint64_t seed, uint64_t index) {
  std::mt19937_64 rng(seed * 1000003ull + index);
  std::uniform_real_distribution<float> uf(0.f, 1.f);

  const float sky_r = 0.3f + 0.5f * uf(rng), sky_g = 0.5f + 0.4f * uf(rng),
              sky_b = 0.7f + 0.3f * uf(rng);
  const float sun_x = uf(rng) * side, sun_y = uf(rng) * side * 0.4f;
  const float sun_rad = side * (0.04f + 0.05f * uf(rng));

  // Two ridge lines as sums of sinusoids.
  auto ridge = [&](float base_frac) {
    struct R {
      float base, a1, f1, p1, a2, f2, p2;
    } r;
    r.base = side * base_frac;
    r.a1 = side * (0.03f + 0.06f * uf(rng));
    r.f1 = 1.f + 3.f * uf(rng);
    r.p1 = 6.28f * uf(rng);
    r.a2 = side * (0.01f + 0.03f * uf(rng));
    r.f2 = 4.f + 6.f * uf(rng);
    r.p2 = 6.28f * uf(rng);
    return r;
  };
  const auto r1 = ridge(0.45f + 0.1f * uf(rng));
  const auto r2 = ridge(0.65f + 0.1f * uf(rng));
  const float m1_v = 0.25f + 0.2f * uf(rng);
  const float g_r = 0.15f + 0.25f * uf(rng), g_g = 0.35f + 0.3f * uf(rng),
              g_b = 0.1f + 0.15f * uf(rng);

  std::mt19937_64 noise_rng(seed * 7919ull + index);
  std::uniform_real_distribution<float> nf(-0.03f, 0.03f);

  ImageTensor img(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const float t = static_cast<float>(y) / side;
      float r = sky_r * (1 - 0.4f * t), g = sky_g * (1 - 0.3f * t),
            b = sky_b;
      const float dx = x - sun_x, dy = y - sun_y;
      if (dx * dx + dy * dy < sun_rad * sun_rad) {
        r = 1.f;
        g = 0.95f;
        b = 0.8f;
      }
      const float h1 = r1.base + r1.a1 * std::sin(r1.f1 * 6.28f * x / side +
                                                  r1.p1) +
                       r1.a2 * std::sin(r1.f2 * 6.28f * x / side + r1.p2);
      const float h2 = r2.base + r2.a1 * std::sin(r2.f1 * 6.28f * x / side +
                                                  r2.p1) +
                       r2.a2 * std::sin(r2.f2 * 6.28f * x / side + r2.p2);
      if (y > h1) {
        r = m1_v;
        g = m1_v * 1.05f;
        b = m1_v * 1.2f;
      }
      if (y > h2) {
        const float shade = 1.f - 0.4f * (static_cast<float>(y) - h2) / side;
        r = g_r * shade;
        g = g_g * shade;
        b = g_b * shade;
      }
      const float n = nf(noise_rng);
      img.at(0, y, x) = std::clamp(r + n, 0.f, 1.f);
      img.at(1, y, x) = std::clamp(g + n, 0.f, 1.f);
      img.at(2, y, x) = std::clamp(b + n, 0.f, 1.f);
    }
  return img;
}

}  // namespace outpaint
