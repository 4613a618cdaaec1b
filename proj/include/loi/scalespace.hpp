#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "loi/core.hpp"

namespace loi {

/// Truncated, renormalized Gaussian taps; weights[radius] is the center.
struct Kernel1D {
  int radius = 0;
  std::vector<double> weights{1.0};
};

/// Samples exp(-x^2 / 2 stddev^2) for |x| <= ceil(3 stddev) and normalizes.
/// stddev == 0 gives the identity kernel.
Kernel1D gaussian_kernel(double stddev);

/// Reflect-101 index: -1 -> 1, n -> n - 2, folded repeatedly for long kernels.
int mirror_index(int i, int n);

/// A linear map on n samples stored as sparse rows of (index, weight) pairs;
/// mirrored taps that land on the same sample are merged.
class LineOperator {
 public:
  LineOperator() = default;
  /// Mirrored convolution with `kernel` on n samples.
  static LineOperator convolution(const Kernel1D& kernel, int n);

  LineOperator transpose() const;
  int size() const { return n_; }
  bool is_identity() const { return identity_; }

  /// Dense row i (for tests and debugging).
  std::vector<double> row(int i) const;

  /// out[y, :] = sum_j A[y, j] in[j, :] over a rows x cols block (rows == n).
  void apply_rows(std::span<const double> in, std::span<double> out, int cols) const;
  /// out[:, x] = sum_j A[x, j] in[:, j] over a rows x cols block (cols == n).
  void apply_cols(std::span<const double> in, std::span<double> out, int rows) const;

 private:
  int n_ = 0;
  bool identity_ = true;
  std::vector<int> row_start_;
  std::vector<int> index_;
  std::vector<double> weight_;
};

/// Separable Gaussian blur of a height x width plane (row-major), horizontal
/// then vertical, with reflect-101 boundaries.
class Blur2D {
 public:
  Blur2D() = default;
  Blur2D(double stddev, int width, int height);

  double stddev() const { return stddev_; }
  int width() const { return width_; }
  int height() const { return height_; }
  bool is_identity() const { return horizontal_.is_identity() && vertical_.is_identity(); }

  void apply(std::span<const double> in, std::span<double> out) const;
  /// Adjoint of apply(); differs from apply() only near the boundary.
  void apply_transpose(std::span<const double> in, std::span<double> out) const;

 private:
  void run(const LineOperator& h, const LineOperator& v, std::span<const double> in,
           std::span<double> out) const;

  double stddev_ = 0.0;
  int width_ = 0;
  int height_ = 0;
  LineOperator horizontal_, vertical_;
  LineOperator horizontal_t_, vertical_t_;
};

/// Blurs every channel independently.
ImageBuffer blur(const ImageBuffer& img, double stddev);
/// Adjoint of blur().
ImageBuffer blur_transpose(const ImageBuffer& img, double stddev);

/// Per-pixel histogram H(x, k) at one (sigma, alpha, beta) scale, stored as
/// `bins` planes of width x height masses.
struct LOIField {
  int width = 0;
  int height = 0;
  int bins = 0;
  double sigma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int channel = 0;
  std::vector<double> data;

  LOIField() = default;
  LOIField(int width, int height, int bins, double sigma, double alpha, double beta,
           int channel = 0);

  int pixel_count() const { return width * height; }
  std::span<double> plane(int k) {
    return {data.data() + static_cast<std::size_t>(k) * pixel_count(),
            static_cast<std::size_t>(pixel_count())};
  }
  std::span<const double> plane(int k) const {
    return {data.data() + static_cast<std::size_t>(k) * pixel_count(),
            static_cast<std::size_t>(pixel_count())};
  }
  double& at(int x, int y, int k) {
    return data[static_cast<std::size_t>(k) * pixel_count() + y * width + x];
  }
  double at(int x, int y, int k) const {
    return data[static_cast<std::size_t>(k) * pixel_count() + y * width + x];
  }
  bool same_layout(const LOIField& other) const {
    return width == other.width && height == other.height && bins == other.bins;
  }
};

struct FieldStats {
  double max_sum_error = 0.0;  // max over pixels of |sum_k H - 1|
  double min_mass = 0.0;
};
FieldStats field_stats(const LOIField& field);

/// Unnormalized tonal weight of a bin whose center lies `delta` away from the
/// pixel intensity: exp(-delta^2 / 2 beta^2) on |delta| <= 2 beta, tapered
/// with a C1 smoothstep to exactly zero at |delta| = 3 beta.
double tonal_weight(double delta, double beta);
/// d tonal_weight / d delta.
double tonal_weight_derivative(double delta, double beta);

/// Soft histogram of a single-channel image with bin width beta, normalized
/// per pixel. The result carries sigma tag 0 and alpha 0.
LOIField soft_bin(const ImageBuffer& img, double beta);
LOIField soft_bin(const ImageBuffer& img, const ScaleConfig& config);

/// dL/dI for the pixels of `img` given dL/dP for soft_bin(img, beta).
ImageBuffer soft_bin_backward(const ImageBuffer& img, double beta, const LOIField& dL_dP);

/// Blurs every bin plane with a Gaussian of stddev alpha.
LOIField extent_blur(const LOIField& field, double alpha);
/// Adjoint of extent_blur().
LOIField extent_blur_transpose(const LOIField& field, double alpha);

/// All fields of an image, ordered by channel, sigma, beta, alpha.
std::vector<LOIField> build_loi(const ImageBuffer& img, const ScaleConfig& config);

/// Writes the bin planes of `field` side by side as one greyscale PNG,
/// each plane scaled by its own maximum.
void dump_field_png(const std::filesystem::path& path, const LOIField& field);

}  // namespace loi
