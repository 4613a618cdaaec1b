#include "loi/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

namespace loi {

ImageBuffer::ImageBuffer(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 1 || height < 1) {
    throw Error(fmt::format("image extent must be positive, got {}x{}", width, height));
  }
  if (channels != 1 && channels != 3) {
    throw Error(fmt::format("images have 1 or 3 channels, got {}", channels));
  }
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer ImageBuffer::channel(int c) const {
  ImageBuffer out(width_, height_, 1);
  const int n = pixel_count();
  for (int i = 0; i < n; ++i) {
    out.data_[i] = data_[static_cast<std::size_t>(i) * channels_ + c];
  }
  return out;
}

void ImageBuffer::set_channel(int c, const ImageBuffer& plane) {
  if (plane.width_ != width_ || plane.height_ != height_ || plane.channels_ != 1) {
    throw Error("set_channel: plane extent does not match image");
  }
  const int n = pixel_count();
  for (int i = 0; i < n; ++i) {
    data_[static_cast<std::size_t>(i) * channels_ + c] = plane.data_[i];
  }
}

void ImageBuffer::clamp01() {
  for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
}

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b)) {
    throw Error(fmt::format("{}: shape mismatch ({}x{}x{} vs {}x{}x{})", what, a.width(),
                            a.height(), a.channels(), b.width(), b.height(),
                            b.channels()));
  }
}

namespace {

void require_ascending(const std::vector<double>& values, const char* name) {
  if (values.empty()) throw Error(fmt::format("scale config: {} is empty", name));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw Error(fmt::format("scale config: {}[{}] = {} is not a nonnegative number", name,
                              i, values[i]));
    }
    if (i > 0 && values[i] < values[i - 1]) {
      throw Error(fmt::format("scale config: {} must be sorted ascending", name));
    }
  }
}

}  // namespace

void ScaleConfig::validate() const {
  require_ascending(sigmas, "sigmas");
  require_ascending(alphas, "alphas");
  if (betas.empty()) throw Error("scale config: betas is empty");
  for (double b : betas) {
    if (!(b > 0.0 && b <= 1.0)) {
      throw Error(fmt::format("scale config: beta {} outside (0, 1]", b));
    }
  }
}

int ScaleConfig::bin_count(double beta) {
  // A small slack keeps 1/0.125 from landing on 8.000000001.
  return static_cast<int>(std::ceil(1.0 / beta - 1e-9));
}

std::vector<double> ScaleConfig::bin_centers(double beta) {
  const int k = bin_count(beta);
  std::vector<double> centers(k);
  for (int i = 0; i < k; ++i) centers[i] = std::min((i + 0.5) * beta, 1.0);
  return centers;
}

void OptTrace::push(const TraceRecord& record) {
  if (!iterations.empty() && record.step <= iterations.back().step) {
    throw Error("trace steps must be strictly increasing");
  }
  if (iterations.empty() && record.step != 0) throw Error("trace must start at step 0");
  iterations.push_back(record);
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

Rng Rng::split() { return Rng(next_u64() ^ 0x6a09e667f3bcc909ULL); }

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "psnr");
  // Accumulate symmetric terms so that psnr(a, b) == psnr(b, a) bit for bit.
  double sum = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(da.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kSsimWindow = 7;

// Summed-area table with a zero border: table(x, y) = sum over [0,x) x [0,y).
std::vector<double> integral(const ImageBuffer& img, int c, auto&& f) {
  const int w = img.width(), h = img.height();
  std::vector<double> table(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0.0;
    for (int x = 0; x < w; ++x) {
      row += f(x, y, c);
      table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
    }
  }
  return table;
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_shape(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow) {
    throw Error(fmt::format("ssim: image {}x{} is smaller than the {}x{} window", a.width(),
                            a.height(), kSsimWindow, kSsimWindow));
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  constexpr double inv_n = 1.0 / (kSsimWindow * kSsimWindow);
  const int w = a.width(), h = a.height();
  const int stride = w + 1;

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    const auto sa = integral(a, c, [&](int x, int y, int ch) { return a.at(x, y, ch); });
    const auto sb = integral(a, c, [&](int x, int y, int ch) { return b.at(x, y, ch); });
    const auto saa = integral(a, c, [&](int x, int y, int ch) {
      return a.at(x, y, ch) * a.at(x, y, ch);
    });
    const auto sbb = integral(a, c, [&](int x, int y, int ch) {
      return b.at(x, y, ch) * b.at(x, y, ch);
    });
    const auto sab = integral(a, c, [&](int x, int y, int ch) {
      return a.at(x, y, ch) * b.at(x, y, ch);
    });
    auto box = [&](const std::vector<double>& t, int x0, int y0) {
      const int x1 = x0 + kSsimWindow, y1 = y0 + kSsimWindow;
      return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] +
             t[y0 * stride + x0];
    };
    double channel_sum = 0.0;
    int windows = 0;
    for (int y = 0; y + kSsimWindow <= h; ++y) {
      for (int x = 0; x + kSsimWindow <= w; ++x) {
        const double mu_a = box(sa, x, y) * inv_n;
        const double mu_b = box(sb, x, y) * inv_n;
        const double var_a = box(saa, x, y) * inv_n - mu_a * mu_a;
        const double var_b = box(sbb, x, y) * inv_n - mu_b * mu_b;
        const double cov = box(sab, x, y) * inv_n - mu_a * mu_b;
        channel_sum += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++windows;
      }
    }
    total += channel_sum / windows;
  }
  return total / a.channels();
}

ImageBuffer add_gaussian_noise(const ImageBuffer& img, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw Error("add_gaussian_noise: stddev must be >= 0");
  ImageBuffer out = img;
  if (stddev == 0.0) return out;
  Rng rng(seed);
  for (double& v : out.data()) v = std::clamp(v + stddev * rng.normal(), 0.0, 1.0);
  return out;
}

}  // namespace loi
