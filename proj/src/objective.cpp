#include "loi/objective.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/core.h>

namespace loi {

void write_loss_report_csv(std::ostream& os, const LossReport& report) {
  os << "sigma,alpha,beta,channel,value\r\n";
  for (const ScaleTerm& t : report.per_scale) {
    os << fmt::format("{},{},{},{},{:.17g}\r\n", t.sigma, t.alpha, t.beta, t.channel, t.value);
  }
}

void InvariantMonitor::record(const FieldStats& stats, double cdf_terminal_error) {
  Summary s;
  s.fields = 1;
  s.max_mass_sum_error = stats.max_sum_error;
  s.min_mass = stats.min_mass;
  s.max_cdf_terminal_error = cdf_terminal_error;
  merge(s);
}

void InvariantMonitor::merge(const Summary& other) {
  if (other.fields == 0) return;
  std::lock_guard lock(mutex_);
  if (summary_.fields == 0) {
    summary_ = other;
    return;
  }
  summary_.fields += other.fields;
  summary_.max_mass_sum_error = std::max(summary_.max_mass_sum_error, other.max_mass_sum_error);
  summary_.min_mass = std::min(summary_.min_mass, other.min_mass);
  summary_.max_cdf_terminal_error =
      std::max(summary_.max_cdf_terminal_error, other.max_cdf_terminal_error);
}

InvariantMonitor::Summary InvariantMonitor::summary() const {
  std::lock_guard lock(mutex_);
  return summary_;
}

namespace {

void prefix_sum_planes(std::span<double> data, int bins, int n) {
  for (int k = 1; k < bins; ++k) {
    double* cur = data.data() + static_cast<std::size_t>(k) * n;
    const double* prev = cur - n;
    for (int p = 0; p < n; ++p) cur[p] += prev[p];
  }
}

void suffix_sum_planes(std::span<double> data, int bins, int n) {
  for (int k = bins - 2; k >= 0; --k) {
    double* cur = data.data() + static_cast<std::size_t>(k) * n;
    const double* next = cur + n;
    for (int p = 0; p < n; ++p) cur[p] += next[p];
  }
}

double terminal_error(std::span<const double> cdf, int bins, int n) {
  const double* last = cdf.data() + static_cast<std::size_t>(bins - 1) * n;
  double worst = 0.0;
  for (int p = 0; p < n; ++p) worst = std::max(worst, std::abs(last[p] - 1.0));
  return worst;
}

}  // namespace

LOIField cdf_along_k(const LOIField& field) {
  LOIField out = field;
  prefix_sum_planes(out.data, out.bins, out.pixel_count());
  return out;
}

double w1_distance(const LOIField& a, const LOIField& b) {
  if (!a.same_layout(b)) {
    throw Error(fmt::format("w1_distance: field layouts differ ({}x{}x{} vs {}x{}x{})", a.width,
                            a.height, a.bins, b.width, b.height, b.bins));
  }
  if (a.sigma != b.sigma || a.alpha != b.alpha || a.beta != b.beta) {
    throw Error("w1_distance: fields are tagged with different scales");
  }
  const int n = a.pixel_count();
  // Running CDFs per pixel, bin by bin.
  std::vector<double> ca(n, 0.0), cb(n, 0.0);
  double sum = 0.0;
  for (int k = 0; k < a.bins; ++k) {
    const auto pa = a.plane(k);
    const auto pb = b.plane(k);
    for (int p = 0; p < n; ++p) {
      ca[p] += pa[p];
      cb[p] += pb[p];
      sum += std::abs(ca[p] - cb[p]);
    }
  }
  return sum * a.beta / n;
}

LoiObjective::LoiObjective(const ImageBuffer& reference, ScaleConfig config,
                           InvariantMonitor* monitor)
    : reference_(reference), config_(std::move(config)), monitor_(monitor) {
  config_.validate();
  const int w = reference.width(), h = reference.height();
  for (double s : config_.sigmas) sigma_blurs_.emplace_back(s, w, h);
  for (double a : config_.alphas) alpha_blurs_.emplace_back(a, w, h);

  const int n = reference.pixel_count();
  for (int c = 0; c < reference.channels(); ++c) {
    const ImageBuffer plane = reference.channel(c);
    for (std::size_t s = 0; s < config_.sigmas.size(); ++s) {
      ImageBuffer blurred(w, h, 1);
      sigma_blurs_[s].apply(plane.data(), blurred.data());
      for (double beta : config_.betas) {
        const LOIField binned = soft_bin(blurred, beta);
        for (std::size_t a = 0; a < config_.alphas.size(); ++a) {
          LOIField cdf(w, h, binned.bins, config_.sigmas[s], config_.alphas[a], beta, c);
          for (int k = 0; k < binned.bins; ++k) {
            alpha_blurs_[a].apply(binned.plane(k), cdf.plane(k));
          }
          const FieldStats stats = monitor_ ? field_stats(cdf) : FieldStats{};
          prefix_sum_planes(cdf.data, cdf.bins, n);
          if (monitor_) monitor_->record(stats, terminal_error(cdf.data, cdf.bins, n));
          reference_cdfs_.push_back(std::move(cdf));
        }
      }
    }
  }
}

std::size_t LoiObjective::ref_index(int channel, std::size_t sigma, std::size_t beta,
                                    std::size_t alpha) const {
  const std::size_t ns = config_.sigmas.size(), nb = config_.betas.size(),
                    na = config_.alphas.size();
  return ((static_cast<std::size_t>(channel) * ns + sigma) * nb + beta) * na + alpha;
}

LossReport LoiObjective::evaluate(const ImageBuffer& rendered, ImageBuffer* grad) const {
  require_same_shape(rendered, reference_, "loi_loss");
  const int w = rendered.width(), h = rendered.height();
  const int n = rendered.pixel_count();
  if (grad) *grad = ImageBuffer(w, h, rendered.channels(), 0.0);

  InvariantMonitor::Summary local;
  auto note = [&](const FieldStats& stats, double terminal) {
    if (!monitor_) return;
    InvariantMonitor::Summary s{1, stats.max_sum_error, stats.min_mass, terminal};
    if (local.fields == 0) {
      local = s;
    } else {
      local.fields += 1;
      local.max_mass_sum_error = std::max(local.max_mass_sum_error, s.max_mass_sum_error);
      local.min_mass = std::min(local.min_mass, s.min_mass);
      local.max_cdf_terminal_error = std::max(local.max_cdf_terminal_error, terminal);
    }
  };

  LossReport report;
  ImageBuffer blurred(w, h, 1);
  ImageBuffer grad_blurred(w, h, 1);
  ImageBuffer grad_plane(w, h, 1);
  std::vector<double> field_buf;
  std::vector<double> blurred_grad_plane(n);

  for (int c = 0; c < rendered.channels(); ++c) {
    const ImageBuffer plane = rendered.channel(c);
    for (std::size_t s = 0; s < config_.sigmas.size(); ++s) {
      sigma_blurs_[s].apply(plane.data(), blurred.data());
      if (grad) std::fill(grad_blurred.data().begin(), grad_blurred.data().end(), 0.0);
      for (std::size_t b = 0; b < config_.betas.size(); ++b) {
        const double beta = config_.betas[b];
        const LOIField binned = soft_bin(blurred, beta);
        const int bins = binned.bins;
        LOIField grad_binned;
        if (grad) grad_binned = LOIField(w, h, bins, 0.0, 0.0, beta);
        field_buf.resize(static_cast<std::size_t>(bins) * n);
        const std::span<double> field(field_buf);
        // Empty bin planes stay empty under the extent blur, and their tonal
        // weights have zero slope, so both passes can skip them.
        std::vector<char> active(bins);
        for (int k = 0; k < bins; ++k) {
          const auto p = binned.plane(k);
          active[k] = std::any_of(p.begin(), p.end(), [](double v) { return v != 0.0; });
        }

        for (std::size_t a = 0; a < config_.alphas.size(); ++a) {
          const Blur2D& extent = alpha_blurs_[a];
          for (int k = 0; k < bins; ++k) {
            const auto dst = field.subspan(static_cast<std::size_t>(k) * n, n);
            if (active[k]) {
              extent.apply(binned.plane(k), dst);
            } else {
              std::fill(dst.begin(), dst.end(), 0.0);
            }
          }
          FieldStats stats;
          if (monitor_) {
            LOIField view(w, h, bins, config_.sigmas[s], config_.alphas[a], beta, c);
            view.data = field_buf;
            stats = field_stats(view);
          }
          prefix_sum_planes(field, bins, n);
          if (monitor_) note(stats, terminal_error(field, bins, n));

          const LOIField& ref = reference_cdfs_[ref_index(c, s, b, a)];
          const double scale = beta / n;
          double sum = 0.0;
          for (std::size_t i = 0; i < field_buf.size(); ++i) {
            const double diff = field_buf[i] - ref.data[i];
            sum += std::abs(diff);
            if (grad) field_buf[i] = diff > 0.0 ? scale : (diff < 0.0 ? -scale : 0.0);
          }
          report.per_scale.push_back(
              {config_.sigmas[s], config_.alphas[a], beta, c, sum * scale});

          if (grad) {
            // cdf transpose, then the extent blur adjoint per bin plane.
            suffix_sum_planes(field, bins, n);
            for (int k = 0; k < bins; ++k) {
              if (!active[k]) continue;
              extent.apply_transpose(field.subspan(static_cast<std::size_t>(k) * n, n),
                                     blurred_grad_plane);
              auto dst = grad_binned.plane(k);
              for (int p = 0; p < n; ++p) dst[p] += blurred_grad_plane[p];
            }
          }
        }
        if (grad) {
          const ImageBuffer g = soft_bin_backward(blurred, beta, grad_binned);
          auto dst = grad_blurred.data();
          const auto src = g.data();
          for (int p = 0; p < n; ++p) dst[p] += src[p];
        }
      }
      if (grad) {
        sigma_blurs_[s].apply_transpose(grad_blurred.data(), grad_plane.data());
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) grad->at(x, y, c) += grad_plane.at(x, y);
        }
      }
    }
  }
  for (const ScaleTerm& t : report.per_scale) report.total += t.value;
  if (monitor_) monitor_->merge(local);
  return report;
}

std::pair<LossReport, ImageBuffer> loi_loss(const ImageBuffer& rendered,
                                            const ImageBuffer& reference,
                                            const ScaleConfig& config) {
  require_same_shape(rendered, reference, "loi_loss");
  const LoiObjective objective(reference, config);
  ImageBuffer grad;
  LossReport report = objective.evaluate(rendered, &grad);
  return {std::move(report), std::move(grad)};
}

ImageLoss mse_loss(const ImageBuffer& rendered, const ImageBuffer& reference) {
  require_same_shape(rendered, reference, "mse_loss");
  ImageLoss out{0.0, ImageBuffer(rendered.width(), rendered.height(), rendered.channels())};
  const auto r = rendered.data();
  const auto t = reference.data();
  auto g = out.grad.data();
  const double n = static_cast<double>(r.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - t[i];
    sum += d * d;
    g[i] = 2.0 * d / n;
  }
  out.value = sum / n;
  return out;
}

GpObjective::GpObjective(const ImageBuffer& reference, std::vector<double> sigmas)
    : sigmas_(std::move(sigmas)) {
  if (sigmas_.empty()) throw Error("gp_loss: sigma list is empty");
  for (double s : sigmas_) {
    blurs_.emplace_back(s, reference.width(), reference.height());
    ImageBuffer blurred(reference.width(), reference.height(), reference.channels());
    for (int c = 0; c < reference.channels(); ++c) {
      const ImageBuffer plane = reference.channel(c);
      ImageBuffer out(reference.width(), reference.height(), 1);
      blurs_.back().apply(plane.data(), out.data());
      blurred.set_channel(c, out);
    }
    blurred_reference_.push_back(std::move(blurred));
  }
}

ImageLoss GpObjective::evaluate(const ImageBuffer& rendered, bool with_grad) const {
  require_same_shape(rendered, blurred_reference_.front(), "gp_loss");
  const int w = rendered.width(), h = rendered.height();
  ImageLoss total;
  if (with_grad) total.grad = ImageBuffer(w, h, rendered.channels(), 0.0);
  ImageBuffer blurred(w, h, 1), back(w, h, 1);
  for (std::size_t s = 0; s < sigmas_.size(); ++s) {
    ImageBuffer full(w, h, rendered.channels());
    for (int c = 0; c < rendered.channels(); ++c) {
      blurs_[s].apply(rendered.channel(c).data(), blurred.data());
      full.set_channel(c, blurred);
    }
    ImageLoss term = mse_loss(full, blurred_reference_[s]);
    total.value += term.value;
    if (!with_grad) continue;
    for (int c = 0; c < rendered.channels(); ++c) {
      blurs_[s].apply_transpose(term.grad.channel(c).data(), back.data());
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) total.grad.at(x, y, c) += back.at(x, y);
      }
    }
  }
  return total;
}

ImageLoss gp_loss(const ImageBuffer& rendered, const ImageBuffer& reference,
                  const std::vector<double>& sigmas) {
  require_same_shape(rendered, reference, "gp_loss");
  return GpObjective(reference, sigmas).evaluate(rendered);
}

}  // namespace loi
