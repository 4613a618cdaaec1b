#include "loi/optim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace loi {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw Error(fmt::format("adam_step: length mismatch (params {}, grad {}, state {})",
                            params.size(), grad.size(), state.m.size()));
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(state.beta1, state.step);
  const double c2 = 1.0 - std::pow(state.beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "loi") return LossKind::loi;
  if (name == "mse") return LossKind::mse;
  if (name == "gp") return LossKind::gp;
  throw Error(fmt::format("unknown loss kind '{}' (expected loi, mse or gp)", name));
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::loi: return "loi";
    case LossKind::mse: return "mse";
    case LossKind::gp: return "gp";
  }
  return "?";
}

void Problem::validate() const {
  initial.validate();
  ground_truth.validate();
  config.validate();
  layout.validate(initial);
  layout.validate(ground_truth);
  if (reference.empty()) throw Error("problem: reference image is empty");
  if (reference.channels() != initial.channels()) {
    throw Error("problem: reference channel count does not match the scene");
  }
}

Evaluator::Evaluator(const Problem& problem, InvariantMonitor* monitor) : problem_(problem) {
  problem_.validate();
  target_ = render(problem_.ground_truth, problem_.width(), problem_.height());
  switch (problem_.loss) {
    case LossKind::loi:
      loi_ = std::make_unique<LoiObjective>(problem_.reference, problem_.config, monitor);
      break;
    case LossKind::gp:
      gp_ = std::make_unique<GpObjective>(problem_.reference, problem_.config.sigmas);
      break;
    case LossKind::mse: break;
  }
}

double Evaluator::image_loss(const ImageBuffer& rendered, ImageBuffer* grad) const {
  switch (problem_.loss) {
    case LossKind::loi: return loi_->evaluate(rendered, grad).total;
    case LossKind::gp: {
      ImageLoss l = gp_->evaluate(rendered, grad != nullptr);
      if (grad) *grad = std::move(l.grad);
      return l.value;
    }
    case LossKind::mse: {
      ImageLoss l = mse_loss(rendered, problem_.reference);
      if (grad) *grad = std::move(l.grad);
      return l.value;
    }
  }
  throw Error("unknown loss kind");
}

double Evaluator::loss(const ParamVector& params) const {
  const DiskScene scene = scatter_params(problem_.initial, params);
  return image_loss(render(scene, problem_.width(), problem_.height()), nullptr);
}

GradientResult Evaluator::gradient(const ParamVector& params) const {
  const DiskScene scene = scatter_params(problem_.initial, params);
  const ImageBuffer rendered = render(scene, problem_.width(), problem_.height());
  ImageBuffer dL_dI;
  GradientResult out;
  out.loss = image_loss(rendered, &dL_dI);
  out.grad = render_backward(scene, problem_.width(), problem_.height(), dL_dI, params.layout);
  return out;
}

GradientResult end_to_end_gradient(const Problem& problem, const ParamVector& params) {
  return Evaluator(problem).gradient(params);
}

std::vector<double> finite_diff_gradient(const ScalarFunction& f, std::span<const double> x,
                                         double h) {
  if (!(h > 0.0)) throw Error("finite_diff_gradient: step must be > 0");
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    point[i] = x[i] + h;
    const double up = f(point);
    point[i] = x[i] - h;
    const double down = f(point);
    point[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParamVector finite_diff_gradient(const Evaluator& evaluator, const ParamVector& params,
                                 double h) {
  ParamVector probe = params;
  auto f = [&](std::span<const double> values) {
    std::copy(values.begin(), values.end(), probe.values.begin());
    return evaluator.loss(probe);
  };
  return {params.layout, finite_diff_gradient(f, params.values, h)};
}

ParamVector finite_diff_gradient(const Problem& problem, const ParamVector& params, double h) {
  return finite_diff_gradient(Evaluator(problem), params, h);
}

SmoothedGradient smoothed_gradient(const ScalarFunction& f, std::span<const double> x,
                                   double stddev, int samples, std::uint64_t seed) {
  if (samples < 2) throw Error("smoothed_gradient: needs at least 2 samples");
  if (!(stddev > 0.0)) throw Error("smoothed_gradient: stddev must be > 0");
  Rng rng(seed);
  const std::size_t dim = x.size();
  std::vector<double> eps(dim), plus(dim), minus(dim);
  SmoothedGradient out{0.0, std::vector<double>(dim, 0.0)};
  for (int s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < dim; ++i) {
      eps[i] = stddev * rng.normal();
      plus[i] = x[i] + eps[i];
      minus[i] = x[i] - eps[i];
    }
    const double lp = f(plus);
    const double lm = f(minus);
    out.loss += 0.5 * (lp + lm);
    for (std::size_t i = 0; i < dim; ++i) out.grad[i] += (lp - lm) * eps[i];
  }
  out.loss /= samples;
  const double norm = 1.0 / (2.0 * stddev * stddev * samples);
  for (double& g : out.grad) g *= norm;
  return out;
}

SmoothedGradient smoothed_gradient(const Evaluator& evaluator, const ParamVector& params,
                                   double stddev, int samples, std::uint64_t seed) {
  ParamVector probe = params;
  auto f = [&](std::span<const double> values) {
    std::copy(values.begin(), values.end(), probe.values.begin());
    return evaluator.loss(probe);
  };
  return smoothed_gradient(f, params.values, stddev, samples, seed);
}

std::vector<double> param_scales(const ParamLayout& layout, int width, int height) {
  std::vector<double> scales(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    switch (layout.slots[i].kind) {
      case ParamKind::center_x: scales[i] = width; break;
      case ParamKind::center_y: scales[i] = height; break;
      case ParamKind::radius: scales[i] = std::max(width, height); break;
      case ParamKind::color: scales[i] = 1.0; break;
    }
  }
  return scales;
}

double param_mae(const ParamVector& params, const DiskScene& truth) {
  if (params.size() == 0) return 0.0;
  const ParamVector reference = gather_params(truth, params.layout);
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    sum += std::abs(params.values[i] - reference.values[i]);
  }
  return sum / static_cast<double>(params.size());
}

OptResult optimize(const Problem& problem, const OptimizerSettings& settings,
                   std::uint64_t seed, InvariantMonitor* monitor) {
  if (settings.max_iters < 0) throw Error("optimize: max_iters must be >= 0");
  const Evaluator evaluator(problem, monitor);
  ParamVector params = gather_params(problem.initial, problem.layout);
  const std::vector<double> scales = param_scales(problem.layout, problem.width(),
                                                  problem.height());
  const std::size_t dim = params.size();
  std::vector<double> u(dim), grad_u(dim);
  for (std::size_t i = 0; i < dim; ++i) u[i] = params.values[i] / scales[i];

  AdamState adam(dim, settings.lr);
  Rng rng(seed);
  OptResult result;

  auto record = [&](int step, double loss) {
    const DiskScene scene = scatter_params(problem.initial, params);
    const ImageBuffer img = render(scene, problem.width(), problem.height());
    result.trace.push({step, loss, param_mae(params, problem.ground_truth),
                       psnr(img, evaluator.target())});
  };
  auto sync = [&] {
    for (std::size_t i = 0; i < dim; ++i) params.values[i] = u[i] * scales[i];
  };

  const double decay = settings.max_iters > 0 && settings.final_lr_factor != 1.0
                           ? std::pow(settings.final_lr_factor, 1.0 / settings.max_iters)
                           : 1.0;
  for (int it = 0;; ++it) {
    double loss = 0.0;
    double norm2 = 0.0;
    if (settings.source == GradientSource::analytic) {
      const GradientResult g = evaluator.gradient(params);
      loss = g.loss;
      for (std::size_t i = 0; i < dim; ++i) {
        grad_u[i] = g.grad.values[i] * scales[i];
        norm2 += g.grad.values[i] * g.grad.values[i];
      }
    } else {
      ParamVector probe = params;
      auto f = [&](std::span<const double> values) {
        for (std::size_t i = 0; i < dim; ++i) probe.values[i] = values[i] * scales[i];
        return evaluator.loss(probe);
      };
      const SmoothedGradient g = smoothed_gradient(f, u, settings.smoothing_stddev,
                                                   settings.smoothing_samples, rng.next_u64());
      loss = evaluator.loss(params);
      for (std::size_t i = 0; i < dim; ++i) {
        grad_u[i] = g.grad[i];
        const double raw = g.grad[i] / scales[i];
        norm2 += raw * raw;
      }
    }
    record(it, loss);
    if (it >= settings.max_iters || std::sqrt(norm2) < settings.stop_grad_norm) break;
    adam.lr = settings.lr * std::pow(decay, it);
    adam_step(adam, u, grad_u);
    sync();
  }
  result.final_scene = scatter_params(problem.initial, params);
  result.final_params = params;
  return result;
}

}  // namespace loi
