#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "outpaint/dataset.hpp"
#include "outpaint/errors.hpp"
#include "outpaint/image.hpp"
#include "outpaint/training.hpp"

namespace outpaint {

inline double mse(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw ShapeError("mse: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / a.size();
}

// 10 * log10(1 / MSE), peak 1.0. Identical images give +infinity.
inline double psnr(const ImageTensor& a, const ImageTensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

inline double mae(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw ShapeError("mae: shape mismatch");
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i)
    s += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return s / a.size();
}

namespace detail_ssim {

inline std::vector<float> gaussian_window_11(float sigma = 1.5f) {
  std::vector<float> w(11 * 11);
  float sum = 0.f;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) {
      const float dy = y - 5.f, dx = x - 5.f;
      w[y * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      sum += w[y * 11 + x];
    }
  for (float& v : w) v /= sum;
  return w;
}

}  // namespace detail_ssim

// Reference SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, mean over valid (fully interior) window positions.
// 3-channel inputs are converted to luminance first.
inline double ssim(const ImageTensor& a_in, const ImageTensor& b_in) {
  if (!a_in.same_shape(b_in)) throw ShapeError("ssim: shape mismatch");
  const ImageTensor a = a_in.channels == 3 ? to_grayscale(a_in) : a_in;
  const ImageTensor b = b_in.channels == 3 ? to_grayscale(b_in) : b_in;
  const int H = a.height, W = a.width;
  if (H < 11 || W < 11) throw ConfigError("ssim: image smaller than window");

  static const std::vector<float> win = detail_ssim::gaussian_window_11();
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;

  double total = 0;
  size_t count = 0;
  for (int y = 0; y + 11 <= H; ++y)
    for (int x = 0; x + 11 <= W; ++x) {
      double mu_a = 0, mu_b = 0;
      for (int wy = 0; wy < 11; ++wy)
        for (int wx = 0; wx < 11; ++wx) {
          const double w = win[wy * 11 + wx];
          mu_a += w * a.at(0, y + wy, x + wx);
          mu_b += w * b.at(0, y + wy, x + wx);
        }
      double va = 0, vb = 0, cov = 0;
      for (int wy = 0; wy < 11; ++wy)
        for (int wx = 0; wx < 11; ++wx) {
          const double w = win[wy * 11 + wx];
          const double da = a.at(0, y + wy, x + wx) - mu_a;
          const double db = b.at(0, y + wy, x + wx) - mu_b;
          va += w * da * da;
          vb += w * db * db;
          cov += w * da * db;
        }
      const double num = (2 * mu_a * mu_b + C1) * (2 * cov + C2);
      const double den = (mu_a * mu_a + mu_b * mu_b + C1) * (va + vb + C2);
      total += num / den;
      ++count;
    }
  return total / count;
}

struct MetricsReport {
  struct Record {
    std::string id;
    double psnr_db = 0;
    double ssim_value = 0;
    double mae_value = 0;
  };
  std::string model_tag;
  double mask_ratio = 0.25;
  std::vector<Record> per_image;
  double mean_psnr = 0, mean_ssim = 0, mean_mae = 0;
  int count = 0;
  int infinite_psnr_excluded = 0;

  void aggregate() {
    count = static_cast<int>(per_image.size());
    mean_psnr = mean_ssim = mean_mae = 0;
    infinite_psnr_excluded = 0;
    int psnr_n = 0;
    for (const auto& r : per_image) {
      if (std::isinf(r.psnr_db)) {
        ++infinite_psnr_excluded;
      } else {
        mean_psnr += r.psnr_db;
        ++psnr_n;
      }
      mean_ssim += r.ssim_value;
      mean_mae += r.mae_value;
    }
    if (psnr_n) mean_psnr /= psnr_n;
    if (count) {
      mean_ssim /= count;
      mean_mae /= count;
    }
    if (infinite_psnr_excluded)
      std::cerr << "warning: " << infinite_psnr_excluded
                << " identical image pair(s) excluded from the PSNR mean\n";
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& r : per_image)
      per.push_back({{"id", r.id},
                     {"psnr", std::isinf(r.psnr_db) ? 1e30 : r.psnr_db},
                     {"ssim", r.ssim_value},
                     {"mae", r.mae_value}});
    return {{"model_tag", model_tag},
            {"mask_ratio", mask_ratio},
            {"count", count},
            {"infinite_psnr_excluded", infinite_psnr_excluded},
            {"per_image", per},
            {"aggregate",
             {{"psnr", mean_psnr}, {"ssim", mean_ssim}, {"mae", mean_mae}}}};
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write report " + path);
    out << to_json().dump(2) << "\n";
  }
};

// Runs outpaint over a test split and scores the composed output against
// ground truth over the full frame.
inline MetricsReport evaluate_dataset(ModelBundle& bundle,
                                      const std::vector<Sample>& test_set,
                                      double mask_ratio,
                                      const std::string& model_tag,
                                      const CannyParams& canny = {}) {
  if (test_set.empty()) throw IngestError("evaluate_dataset: empty test set");
  MetricsReport report;
  report.model_tag = model_tag;
  report.mask_ratio = mask_ratio;
  for (const Sample& s : test_set) {
    const BinaryMask mask =
        make_right_mask(s.image.height, s.image.width, mask_ratio);
    ImageTensor out = outpaint(s.image, mask, bundle, canny);
    MetricsReport::Record r;
    r.id = s.id;
    r.psnr_db = psnr(out, s.image);
    r.ssim_value = ssim(out, s.image);
    r.mae_value = mae(out, s.image);
    report.per_image.push_back(std::move(r));
  }
  report.aggregate();
  return report;
}

// Two-row comparison table in the layout of the quality-evaluation table:
// rows are model tags, columns PSNR / SSIM / MAE, best value per column
// marked with '*' (ties mark both).
inline std::string ablation_table(const MetricsReport& a,
                                  const MetricsReport& b) {
  if (a.mask_ratio != b.mask_ratio || a.count != b.count)
    throw ConfigError("ablation_table: reports cover different test setups");

  const bool psnr_a = a.mean_psnr >= b.mean_psnr;
  const bool psnr_b = b.mean_psnr >= a.mean_psnr;
  const bool ssim_a = a.mean_ssim >= b.mean_ssim;
  const bool ssim_b = b.mean_ssim >= a.mean_ssim;
  const bool mae_a = a.mean_mae <= b.mean_mae;
  const bool mae_b = b.mean_mae <= a.mean_mae;

  auto cell = [](double v, bool best, int prec) {
    std::ostringstream os;
    os << (best ? "*" : " ") << std::fixed << std::setprecision(prec) << v;
    return os.str();
  };

  std::ostringstream os;
  const size_t tag_w = std::max<size_t>(
      20, std::max(a.model_tag.size(), b.model_tag.size()) + 2);
  os << std::left << std::setw(static_cast<int>(tag_w)) << "" << std::right
     << std::setw(10) << "PSNR" << std::setw(10) << "SSIM" << std::setw(10)
     << "MAE" << "\n";
  auto row = [&](const MetricsReport& r, bool bp, bool bs, bool bm) {
    os << std::left << std::setw(static_cast<int>(tag_w)) << r.model_tag
       << std::right << std::setw(10) << cell(r.mean_psnr, bp, 3)
       << std::setw(10) << cell(r.mean_ssim, bs, 3) << std::setw(10)
       << cell(r.mean_mae, bm, 3) << "\n";
  };
  row(a, psnr_a, ssim_a, mae_a);
  row(b, psnr_b, ssim_b, mae_b);
  return os.str();
}

inline nlohmann::json ablation_table_json(const MetricsReport& a,
                                          const MetricsReport& b) {
  auto rowj = [](const MetricsReport& r) {
    return nlohmann::json{{"model_tag", r.model_tag},
                          {"psnr", r.mean_psnr},
                          {"ssim", r.mean_ssim},
                          {"mae", r.mean_mae}};
  };
  return {{"rows", {rowj(a), rowj(b)}},
          {"best",
           {{"psnr", a.mean_psnr >= b.mean_psnr ? a.model_tag : b.model_tag},
            {"ssim", a.mean_ssim >= b.mean_ssim ? a.model_tag : b.model_tag},
            {"mae", a.mean_mae <= b.mean_mae ? a.model_tag : b.model_tag}}}};
}

}  // namespace outpaint
