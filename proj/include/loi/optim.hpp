#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loi/core.hpp"
#include "loi/objective.hpp"
#include "loi/render2d.hpp"

namespace loi {

struct AdamState {
  int step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t count, double lr) : m(count, 0.0), v(count, 0.0), lr(lr) {}
};

/// Bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

enum class LossKind { loi, mse, gp };
LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct Problem {
  DiskScene initial;
  DiskScene ground_truth;
  /// Observed image the loss compares against; may be noisy.
  ImageBuffer reference;
  ParamLayout layout;
  LossKind loss = LossKind::loi;
  ScaleConfig config;

  int width() const { return reference.width(); }
  int height() const { return reference.height(); }
  void validate() const;
};

struct GradientResult {
  double loss = 0.0;
  ParamVector grad;
};

/// Caches the reference-side work of a problem's loss so that repeated
/// evaluations cost one forward (and optionally one backward) pass.
class Evaluator {
 public:
  explicit Evaluator(const Problem& problem, InvariantMonitor* monitor = nullptr);

  double loss(const ParamVector& params) const;
  GradientResult gradient(const ParamVector& params) const;
  /// Clean render of the ground truth, used for reporting.
  const ImageBuffer& target() const { return target_; }
  const Problem& problem() const { return problem_; }

 private:
  double image_loss(const ImageBuffer& rendered, ImageBuffer* grad) const;

  Problem problem_;
  ImageBuffer target_;
  std::unique_ptr<LoiObjective> loi_;
  std::unique_ptr<GpObjective> gp_;
};

/// render -> loss -> dL/dI -> render_backward -> dL/dθ.
GradientResult end_to_end_gradient(const Problem& problem, const ParamVector& params);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences, 2 * dim evaluations.
std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x,
                                         double h);
ParamVector finite_diff_gradient(const Evaluator& evaluator, const ParamVector& params,
                                 double h);
ParamVector finite_diff_gradient(const Problem& problem, const ParamVector& params, double h);

struct SmoothedGradient {
  double loss = 0.0;  // mean of L(θ ± ε) over the samples
  std::vector<double> grad;
};

/// Antithetic Gaussian-smoothing estimator:
///   g = 1 / (2 stddev^2 N) sum_i (L(θ + ε_i) - L(θ - ε_i)) ε_i,  ε_i ~ N(0, stddev^2 I).
SmoothedGradient smoothed_gradient(const ScalarFunction& f, std::span<const double> x,
                                   double stddev, int samples, std::uint64_t seed);
/// Same estimator on a problem; stddev is in pixel/parameter units.
SmoothedGradient smoothed_gradient(const Evaluator& evaluator, const ParamVector& params,
                                   double stddev, int samples, std::uint64_t seed);

enum class GradientSource { analytic, smoothed };

struct OptimizerSettings {
  /// Adam step size in normalized parameter units: centers are divided by
  /// the image width/height, radii by the larger extent, colors are as is.
  double lr = 1e-2;
  int max_iters = 500;
  /// Iteration stops early once the raw gradient norm falls below this.
  double stop_grad_norm = 1e-10;
  /// lr is decayed geometrically to lr * final_lr_factor at max_iters.
  double final_lr_factor = 1.0;
  GradientSource source = GradientSource::analytic;
  /// Smoothing stddev in normalized units (see lr).
  double smoothing_stddev = 0.01;
  int smoothing_samples = 8;
};

struct OptResult {
  OptTrace trace;
  DiskScene final_scene;
  ParamVector final_params;
};

/// Normalization divisor applied to each slot before the optimizer sees it.
std::vector<double> param_scales(const ParamLayout& layout, int width, int height);

/// Mean absolute difference between `params` and the same slots of `truth`.
double param_mae(const ParamVector& params, const DiskScene& truth);

OptResult optimize(const Problem& problem, const OptimizerSettings& settings,
                   std::uint64_t seed, InvariantMonitor* monitor = nullptr);

}  // namespace loi
