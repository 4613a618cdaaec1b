#include "loi/scalespace.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "loi/image_io.hpp"

namespace loi {

Kernel1D gaussian_kernel(double stddev) {
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) {
    throw Error(fmt::format("gaussian_kernel: stddev {} must be >= 0", stddev));
  }
  Kernel1D k;
  if (stddev == 0.0) return k;
  k.radius = static_cast<int>(std::ceil(3.0 * stddev));
  k.weights.assign(2 * k.radius + 1, 0.0);
  const double inv = 1.0 / (2.0 * stddev * stddev);
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.weights[i + k.radius] = std::exp(-static_cast<double>(i) * i * inv);
  }
  // Sum from the tails inwards so that the two halves accumulate identically.
  double sum = k.weights[k.radius];
  for (int i = k.radius; i >= 1; --i) {
    sum += k.weights[k.radius - i] + k.weights[k.radius + i];
  }
  for (double& w : k.weights) w /= sum;
  return k;
}

int mirror_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

LineOperator LineOperator::convolution(const Kernel1D& kernel, int n) {
  if (n < 1) throw Error("LineOperator: length must be positive");
  LineOperator op;
  op.n_ = n;
  op.identity_ = kernel.radius == 0 || n == 1;
  op.row_start_.assign(1, 0);
  std::vector<double> dense(n);
  const int r = kernel.radius;
  for (int i = 0; i < n; ++i) {
    std::fill(dense.begin(), dense.end(), 0.0);
    for (int j = -r; j <= r; ++j) dense[mirror_index(i + j, n)] += kernel.weights[j + r];
    for (int j = 0; j < n; ++j) {
      if (dense[j] != 0.0) {
        op.index_.push_back(j);
        op.weight_.push_back(dense[j]);
      }
    }
    op.row_start_.push_back(static_cast<int>(op.index_.size()));
  }
  return op;
}

LineOperator LineOperator::transpose() const {
  LineOperator t;
  t.n_ = n_;
  t.identity_ = identity_;
  std::vector<std::vector<std::pair<int, double>>> rows(n_);
  for (int i = 0; i < n_; ++i) {
    for (int e = row_start_[i]; e < row_start_[i + 1]; ++e) {
      rows[index_[e]].emplace_back(i, weight_[e]);
    }
  }
  t.row_start_.assign(1, 0);
  for (const auto& row : rows) {
    for (const auto& [j, w] : row) {
      t.index_.push_back(j);
      t.weight_.push_back(w);
    }
    t.row_start_.push_back(static_cast<int>(t.index_.size()));
  }
  return t;
}

std::vector<double> LineOperator::row(int i) const {
  std::vector<double> dense(n_, 0.0);
  for (int e = row_start_[i]; e < row_start_[i + 1]; ++e) dense[index_[e]] = weight_[e];
  return dense;
}

void LineOperator::apply_rows(std::span<const double> in, std::span<double> out,
                              int cols) const {
  // Four taps per sweep over the output row to cut load/store traffic.
  for (int y = 0; y < n_; ++y) {
    double* dst = out.data() + static_cast<std::size_t>(y) * cols;
    std::fill(dst, dst + cols, 0.0);
    int e = row_start_[y];
    const int end = row_start_[y + 1];
    for (; e + 4 <= end; e += 4) {
      const double w0 = weight_[e], w1 = weight_[e + 1], w2 = weight_[e + 2],
                   w3 = weight_[e + 3];
      const double* s0 = in.data() + static_cast<std::size_t>(index_[e]) * cols;
      const double* s1 = in.data() + static_cast<std::size_t>(index_[e + 1]) * cols;
      const double* s2 = in.data() + static_cast<std::size_t>(index_[e + 2]) * cols;
      const double* s3 = in.data() + static_cast<std::size_t>(index_[e + 3]) * cols;
      for (int x = 0; x < cols; ++x) {
        dst[x] += w0 * s0[x] + w1 * s1[x] + w2 * s2[x] + w3 * s3[x];
      }
    }
    for (; e < end; ++e) {
      const double w = weight_[e];
      const double* src = in.data() + static_cast<std::size_t>(index_[e]) * cols;
      for (int x = 0; x < cols; ++x) dst[x] += w * src[x];
    }
  }
}

namespace {

void transpose_block(const double* in, double* out, int rows, int cols) {
  constexpr int kTile = 16;
  for (int y0 = 0; y0 < rows; y0 += kTile) {
    for (int x0 = 0; x0 < cols; x0 += kTile) {
      const int y1 = std::min(rows, y0 + kTile), x1 = std::min(cols, x0 + kTile);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) out[static_cast<std::size_t>(x) * rows + y] =
            in[static_cast<std::size_t>(y) * cols + x];
      }
    }
  }
}

}  // namespace

void LineOperator::apply_cols(std::span<const double> in, std::span<double> out,
                              int rows) const {
  const std::size_t n = static_cast<std::size_t>(rows) * n_;
  thread_local std::vector<double> a, b;
  a.resize(n);
  b.resize(n);
  transpose_block(in.data(), a.data(), rows, n_);
  apply_rows(a, b, rows);
  transpose_block(b.data(), out.data(), n_, rows);
}

Blur2D::Blur2D(double stddev, int width, int height)
    : stddev_(stddev), width_(width), height_(height) {
  const Kernel1D k = gaussian_kernel(stddev);
  horizontal_ = LineOperator::convolution(k, width);
  vertical_ = LineOperator::convolution(k, height);
  horizontal_t_ = horizontal_.transpose();
  vertical_t_ = vertical_.transpose();
}

void Blur2D::run(const LineOperator& h, const LineOperator& v, std::span<const double> in,
                 std::span<double> out) const {
  const std::size_t n = static_cast<std::size_t>(width_) * height_;
  if (in.size() != n || out.size() != n) throw Error("Blur2D: plane size mismatch");
  if (h.is_identity() && v.is_identity()) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  if (v.is_identity()) {
    h.apply_cols(in, out, height_);
    return;
  }
  if (h.is_identity()) {
    v.apply_rows(in, out, width_);
    return;
  }
  thread_local std::vector<double> scratch;
  scratch.resize(n);
  h.apply_cols(in, scratch, height_);
  v.apply_rows(scratch, out, width_);
}

void Blur2D::apply(std::span<const double> in, std::span<double> out) const {
  run(horizontal_, vertical_, in, out);
}

void Blur2D::apply_transpose(std::span<const double> in, std::span<double> out) const {
  run(horizontal_t_, vertical_t_, in, out);
}

namespace {

ImageBuffer blur_impl(const ImageBuffer& img, double stddev, bool transpose) {
  const Blur2D op(stddev, img.width(), img.height());
  ImageBuffer out(img.width(), img.height(), img.channels());
  for (int c = 0; c < img.channels(); ++c) {
    const ImageBuffer plane = img.channel(c);
    ImageBuffer result(img.width(), img.height(), 1);
    if (transpose) {
      op.apply_transpose(plane.data(), result.data());
    } else {
      op.apply(plane.data(), result.data());
    }
    out.set_channel(c, result);
  }
  return out;
}

}  // namespace

ImageBuffer blur(const ImageBuffer& img, double stddev) { return blur_impl(img, stddev, false); }

ImageBuffer blur_transpose(const ImageBuffer& img, double stddev) {
  return blur_impl(img, stddev, true);
}

LOIField::LOIField(int width, int height, int bins, double sigma, double alpha, double beta,
                   int channel)
    : width(width),
      height(height),
      bins(bins),
      sigma(sigma),
      alpha(alpha),
      beta(beta),
      channel(channel),
      data(static_cast<std::size_t>(width) * height * bins, 0.0) {}

FieldStats field_stats(const LOIField& field) {
  FieldStats stats;
  stats.min_mass = field.data.empty() ? 0.0 : field.data.front();
  for (double v : field.data) stats.min_mass = std::min(stats.min_mass, v);
  const int n = field.pixel_count();
  for (int p = 0; p < n; ++p) {
    double sum = 0.0;
    for (int k = 0; k < field.bins; ++k) sum += field.data[static_cast<std::size_t>(k) * n + p];
    stats.max_sum_error = std::max(stats.max_sum_error, std::abs(sum - 1.0));
  }
  return stats;
}

// The taper keeps the truncated kernel continuously differentiable in the
// pixel intensity; a hard cut at 3 beta makes bin masses jump.
double tonal_weight(double delta, double beta) {
  const double u = std::abs(delta) / beta;
  if (u >= 3.0) return 0.0;
  const double g = std::exp(-0.5 * u * u);
  if (u <= 2.0) return g;
  const double s = 3.0 - u;
  return g * s * s * (3.0 - 2.0 * s);
}

double tonal_weight_derivative(double delta, double beta) {
  const double u = std::abs(delta) / beta;
  if (u >= 3.0) return 0.0;
  const double g = std::exp(-0.5 * u * u);
  const double sign = delta < 0.0 ? -1.0 : 1.0;
  // d/du of g * taper(u), then du/d delta = sign / beta.
  double d_du = -u * g;
  if (u > 2.0) {
    const double s = 3.0 - u;
    const double taper = s * s * (3.0 - 2.0 * s);
    const double taper_du = -6.0 * s * (1.0 - s);
    d_du = -u * g * taper + g * taper_du;
  }
  return d_du * sign / beta;
}

namespace {

void require_single_channel(const ImageBuffer& img, const char* what) {
  if (img.channels() != 1) {
    throw Error(fmt::format("{}: expects a single-channel image, got {}", what,
                            img.channels()));
  }
}

int nearest_bin(const std::vector<double>& centers, double v) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(centers.size()); ++k) {
    if (std::abs(centers[k] - v) < std::abs(centers[best] - v)) best = k;
  }
  return best;
}

}  // namespace

LOIField soft_bin(const ImageBuffer& img, double beta) {
  require_single_channel(img, "soft_bin");
  if (!(beta > 0.0 && beta <= 1.0)) throw Error("soft_bin: beta outside (0, 1]");
  const auto centers = ScaleConfig::bin_centers(beta);
  const int bins = static_cast<int>(centers.size());
  LOIField field(img.width(), img.height(), bins, 0.0, 0.0, beta);
  const int n = img.pixel_count();
  const auto in = img.data();
  std::vector<double> w(bins);
  for (int p = 0; p < n; ++p) {
    double z = 0.0;
    for (int k = 0; k < bins; ++k) {
      w[k] = tonal_weight(centers[k] - in[p], beta);
      z += w[k];
    }
    if (z > 0.0) {
      for (int k = 0; k < bins; ++k) field.data[static_cast<std::size_t>(k) * n + p] = w[k] / z;
    } else {
      field.data[static_cast<std::size_t>(nearest_bin(centers, in[p])) * n + p] = 1.0;
    }
  }
  return field;
}

LOIField soft_bin(const ImageBuffer& img, const ScaleConfig& config) {
  return soft_bin(img, config.beta());
}

ImageBuffer soft_bin_backward(const ImageBuffer& img, double beta, const LOIField& dL_dP) {
  require_single_channel(img, "soft_bin_backward");
  const auto centers = ScaleConfig::bin_centers(beta);
  const int bins = static_cast<int>(centers.size());
  if (dL_dP.width != img.width() || dL_dP.height != img.height() || dL_dP.bins != bins) {
    throw Error("soft_bin_backward: gradient field does not match image and beta");
  }
  ImageBuffer out(img.width(), img.height(), 1);
  const int n = img.pixel_count();
  const auto in = img.data();
  auto g = out.data();
  for (int p = 0; p < n; ++p) {
    // P_k = w_k / Z with w_k = w(c_k - I), so dw_k/dI = -w'(c_k - I).
    double z = 0.0, dz = 0.0, gw = 0.0, gdw = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double delta = centers[k] - in[p];
      const double w = tonal_weight(delta, beta);
      const double dw = -tonal_weight_derivative(delta, beta);
      const double gk = dL_dP.data[static_cast<std::size_t>(k) * n + p];
      z += w;
      dz += dw;
      gw += gk * w;
      gdw += gk * dw;
    }
    g[p] = z > 0.0 ? gdw / z - gw * dz / (z * z) : 0.0;
  }
  return out;
}

namespace {

LOIField extent_blur_impl(const LOIField& field, double alpha, bool transpose) {
  LOIField out = field;
  out.alpha = transpose ? field.alpha : alpha;
  if (alpha == 0.0) return out;
  const Blur2D op(alpha, field.width, field.height);
  for (int k = 0; k < field.bins; ++k) {
    if (transpose) {
      op.apply_transpose(field.plane(k), out.plane(k));
    } else {
      op.apply(field.plane(k), out.plane(k));
    }
  }
  return out;
}

}  // namespace

LOIField extent_blur(const LOIField& field, double alpha) {
  if (!(alpha >= 0.0)) throw Error("extent_blur: alpha must be >= 0");
  return extent_blur_impl(field, alpha, false);
}

LOIField extent_blur_transpose(const LOIField& field, double alpha) {
  if (!(alpha >= 0.0)) throw Error("extent_blur_transpose: alpha must be >= 0");
  return extent_blur_impl(field, alpha, true);
}

std::vector<LOIField> build_loi(const ImageBuffer& img, const ScaleConfig& config) {
  config.validate();
  std::vector<LOIField> fields;
  for (int c = 0; c < img.channels(); ++c) {
    const ImageBuffer plane = img.channel(c);
    for (double sigma : config.sigmas) {
      const ImageBuffer blurred = blur(plane, sigma);
      for (double beta : config.betas) {
        LOIField binned = soft_bin(blurred, beta);
        binned.sigma = sigma;
        binned.channel = c;
        for (double alpha : config.alphas) fields.push_back(extent_blur(binned, alpha));
      }
    }
  }
  return fields;
}

void dump_field_png(const std::filesystem::path& path, const LOIField& field) {
  ImageBuffer strip(field.width * field.bins, field.height, 1);
  for (int k = 0; k < field.bins; ++k) {
    const auto plane = field.plane(k);
    const double peak = *std::max_element(plane.begin(), plane.end());
    const double scale = peak > 0.0 ? 1.0 / peak : 0.0;
    for (int y = 0; y < field.height; ++y) {
      for (int x = 0; x < field.width; ++x) {
        strip.at(k * field.width + x, y) = plane[y * field.width + x] * scale;
      }
    }
  }
  write_png(path, strip);
}

}  // namespace loi
