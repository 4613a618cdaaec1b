#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace loi {

/// Raised for contract violations: shape mismatches, invalid configs,
/// out-of-range arguments.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense H x W x C grid of intensities, row-major with the channel index
/// fastest (the same layout as an 8-bit PNG scanline).
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  int pixel_count() const { return width_ * height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           channels_ == other.channels_;
  }

  /// Single-channel copy of channel `c`.
  ImageBuffer channel(int c) const;
  /// Overwrites channel `c` from a single-channel image of the same extent.
  void set_channel(int c, const ImageBuffer& plane);
  void clamp01();

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Throws loi::Error naming `what` when the two images differ in shape.
void require_same_shape(const ImageBuffer& a, const ImageBuffer& b,
                        const char* what);

/// Scale-space parameters: inner scales (sigmas), extent scales (alphas)
/// and tonal bin widths (betas), all in pixels resp. intensity units.
struct ScaleConfig {
  std::vector<double> sigmas{1.0, 5.0, 15.0, 45.0};
  std::vector<double> alphas{1.0, 5.0, 15.0};
  std::vector<double> betas{0.125};

  /// Throws unless sigmas/alphas are nonempty, nonnegative and ascending and
  /// every beta lies in (0, 1].
  void validate() const;

  double beta() const { return betas.front(); }

  static int bin_count(double beta);
  /// (i + 0.5) * beta clamped to 1, for i in [0, ceil(1/beta)).
  static std::vector<double> bin_centers(double beta);
};

struct TraceRecord {
  int step = 0;
  double loss = 0.0;
  double param_mae = 0.0;
  double psnr = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct OptTrace {
  std::vector<TraceRecord> iterations;

  /// Appends a record; its step must exceed the last one.
  void push(const TraceRecord& record);
  friend bool operator==(const OptTrace&, const OptTrace&) = default;
};

// SplitMix64 (Steele, Lea & Flood 2014). Every random draw in the project goes
// through this generator and the conversions below, so outputs do not depend
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Independent child stream; advances this generator by one draw.
  Rng split();

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all channels, capped at kPsnrCap.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Single-scale SSIM with a 7x7 uniform window over valid windows, constants
/// C1 = 0.01^2 and C2 = 0.03^2 (dynamic range 1), averaged over channels.
/// Window statistics use population (1/49) moments.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

/// i.i.d. N(0, stddev^2) per element, clamped to [0, 1].
ImageBuffer add_gaussian_noise(const ImageBuffer& img, double stddev,
                               std::uint64_t seed);

}  // namespace loi
