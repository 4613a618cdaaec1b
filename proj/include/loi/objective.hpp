#pragma once

#include <iosfwd>
#include <mutex>
#include <vector>

#include "loi/core.hpp"
#include "loi/scalespace.hpp"

namespace loi {

struct ScaleTerm {
  double sigma = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  int channel = 0;
  double value = 0.0;
};

struct LossReport {
  double total = 0.0;
  std::vector<ScaleTerm> per_scale;
};

/// One CSV row per scale term: sigma,alpha,beta,channel,value.
void write_loss_report_csv(std::ostream& os, const LossReport& report);

/// Running worst-case record of the histogram invariants over every field a
/// loss evaluation produced. Safe to share between threads.
class InvariantMonitor {
 public:
  struct Summary {
    long fields = 0;
    double max_mass_sum_error = 0.0;
    double min_mass = 0.0;
    double max_cdf_terminal_error = 0.0;
  };

  void record(const FieldStats& stats, double cdf_terminal_error);
  void merge(const Summary& other);
  Summary summary() const;

 private:
  mutable std::mutex mutex_;
  Summary summary_;
};

/// Prefix sums over the bin axis.
LOIField cdf_along_k(const LOIField& field);

/// beta / N * sum_x sum_k |cdf_a - cdf_b|: the per-pixel 1D Wasserstein-1
/// distance between the histograms, averaged over pixels.
double w1_distance(const LOIField& a, const LOIField& b);

/// Matches rendered and reference images through their locally orderless
/// representations. Reference-side fields and all blur operators are built
/// once at construction.
class LoiObjective {
 public:
  LoiObjective(const ImageBuffer& reference, ScaleConfig config,
               InvariantMonitor* monitor = nullptr);

  /// Loss report; when `grad` is non-null it receives dL/dI for `rendered`.
  LossReport evaluate(const ImageBuffer& rendered, ImageBuffer* grad) const;

  const ScaleConfig& config() const { return config_; }

 private:
  std::size_t ref_index(int channel, std::size_t sigma, std::size_t beta,
                        std::size_t alpha) const;

  ImageBuffer reference_;
  ScaleConfig config_;
  InvariantMonitor* monitor_;
  std::vector<Blur2D> sigma_blurs_;
  std::vector<Blur2D> alpha_blurs_;
  std::vector<LOIField> reference_cdfs_;
};

std::pair<LossReport, ImageBuffer> loi_loss(const ImageBuffer& rendered,
                                            const ImageBuffer& reference,
                                            const ScaleConfig& config);

struct ImageLoss {
  double value = 0.0;
  ImageBuffer grad;
};

/// Mean squared error over all pixels and channels; grad = 2 (r - ref) / N.
ImageLoss mse_loss(const ImageBuffer& rendered, const ImageBuffer& reference);

/// Gaussian-pyramid baseline: sum over sigmas of the MSE between blurred
/// images, with blurs cached across evaluations.
class GpObjective {
 public:
  GpObjective(const ImageBuffer& reference, std::vector<double> sigmas);
  ImageLoss evaluate(const ImageBuffer& rendered, bool with_grad = true) const;

 private:
  std::vector<double> sigmas_;
  std::vector<Blur2D> blurs_;
  std::vector<ImageBuffer> blurred_reference_;
};

ImageLoss gp_loss(const ImageBuffer& rendered, const ImageBuffer& reference,
                  const std::vector<double>& sigmas);

}  // namespace loi
