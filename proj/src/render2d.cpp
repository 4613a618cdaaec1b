#include "loi/render2d.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include <fmt/core.h>

namespace loi {

void DiskScene::validate() const {
  if (background.empty() || (background.size() != 1 && background.size() != 3)) {
    throw Error("scene: background must have 1 or 3 channels");
  }
  if (!(edge_width >= 0.5)) {
    throw Error(fmt::format("scene: edge_width {} must be >= 0.5", edge_width));
  }
  for (std::size_t i = 0; i < disks.size(); ++i) {
    const Disk& d = disks[i];
    if (!(d.radius > 0.0)) throw Error(fmt::format("scene: disk {} radius must be > 0", i));
    if (d.color.size() != background.size()) {
      throw Error(fmt::format("scene: disk {} has {} color channels, background has {}", i,
                              d.color.size(), background.size()));
    }
    if (!std::isfinite(d.cx) || !std::isfinite(d.cy)) {
      throw Error(fmt::format("scene: disk {} center is not finite", i));
    }
  }
}

double edge_coverage(double d, double edge_width, EdgeProfile profile) {
  const double t = std::clamp(0.5 - d / edge_width, 0.0, 1.0);
  if (profile == EdgeProfile::smoothstep) return t * t * (3.0 - 2.0 * t);
  return t;
}

double edge_coverage_slope(double d, double edge_width, EdgeProfile profile) {
  const double t = 0.5 - d / edge_width;
  if (!(t > 0.0 && t < 1.0)) return 0.0;
  if (profile == EdgeProfile::smoothstep) return -6.0 * t * (1.0 - t) / edge_width;
  return -1.0 / edge_width;
}

ParamLayout ParamLayout::select(const DiskScene& scene, const ParamSelection& selection) {
  ParamLayout layout;
  for (int i = 0; i < static_cast<int>(scene.disks.size()); ++i) {
    if (selection.center_x) layout.slots.push_back({i, ParamKind::center_x, 0});
    if (selection.center_y) layout.slots.push_back({i, ParamKind::center_y, 0});
    if (selection.radius) layout.slots.push_back({i, ParamKind::radius, 0});
    if (selection.color) {
      for (int c = 0; c < scene.channels(); ++c) {
        layout.slots.push_back({i, ParamKind::color, c});
      }
    }
  }
  return layout;
}

void ParamLayout::validate(const DiskScene& scene) const {
  std::set<std::tuple<int, int, int>> seen;
  for (const ParamSlot& s : slots) {
    if (s.disk < 0 || s.disk >= static_cast<int>(scene.disks.size())) {
      throw Error(fmt::format("layout: disk index {} out of range", s.disk));
    }
    const int channel = s.kind == ParamKind::color ? s.channel : 0;
    if (s.kind == ParamKind::color && (channel < 0 || channel >= scene.channels())) {
      throw Error(fmt::format("layout: color channel {} out of range", s.channel));
    }
    if (!seen.emplace(s.disk, static_cast<int>(s.kind), channel).second) {
      throw Error(fmt::format("layout: disk {} field listed twice", s.disk));
    }
  }
}

namespace {

template <typename Scene>
auto& field(Scene& scene, const ParamSlot& s) {
  auto& d = scene.disks[s.disk];
  switch (s.kind) {
    case ParamKind::center_x: return d.cx;
    case ParamKind::center_y: return d.cy;
    case ParamKind::radius: return d.radius;
    case ParamKind::color: return d.color[s.channel];
  }
  throw Error("layout: unknown parameter kind");
}

// Neumaier compensated sum; mirror-symmetric contributions cancel exactly,
// which keeps plateau gradients at exactly zero.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct PixelRange {
  int x0, x1, y0, y1;  // inclusive; empty when x0 > x1 or y0 > y1
};

// Pixels whose centers (i + 0.5, j + 0.5) may receive nonzero coverage.
PixelRange disk_pixels(const Disk& d, double edge_width, int width, int height) {
  const double reach = d.radius + 0.5 * edge_width;
  PixelRange r;
  r.x0 = std::max(0, static_cast<int>(std::floor(d.cx - reach - 0.5)));
  r.x1 = std::min(width - 1, static_cast<int>(std::ceil(d.cx + reach - 0.5)));
  r.y0 = std::max(0, static_cast<int>(std::floor(d.cy - reach - 0.5)));
  r.y1 = std::min(height - 1, static_cast<int>(std::ceil(d.cy + reach - 0.5)));
  return r;
}

struct TapeEntry {
  int pixel;
  double alpha;
  double slope;  // d alpha / d(signed distance)
  double ux, uy;  // d(distance to center) / d(pixel - center)
};

// Forward pass that optionally records per-disk coverage and the values
// each disk composited over.
ImageBuffer composite(const DiskScene& scene, int width, int height,
                      std::vector<std::vector<TapeEntry>>* tape,
                      std::vector<std::vector<double>>* under) {
  scene.validate();
  const int channels = scene.channels();
  ImageBuffer img(width, height, channels);
  auto data = img.data();
  for (int p = 0; p < width * height; ++p) {
    for (int c = 0; c < channels; ++c) data[p * channels + c] = scene.background[c];
  }
  if (tape) {
    tape->assign(scene.disks.size(), {});
    under->assign(scene.disks.size(), {});
  }
  for (std::size_t k = 0; k < scene.disks.size(); ++k) {
    const Disk& disk = scene.disks[k];
    const PixelRange r = disk_pixels(disk, scene.edge_width, width, height);
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) {
        const double dx = (x + 0.5) - disk.cx;
        const double dy = (y + 0.5) - disk.cy;
        const double dist = std::sqrt(dx * dx + dy * dy);
        const double sd = dist - disk.radius;
        const double a = edge_coverage(sd, scene.edge_width, scene.profile);
        if (a <= 0.0) continue;
        const int p = y * width + x;
        if (tape) {
          TapeEntry e{p, a, edge_coverage_slope(sd, scene.edge_width, scene.profile), 0.0,
                      0.0};
          if (dist > 0.0) {
            e.ux = dx / dist;
            e.uy = dy / dist;
          }
          (*tape)[k].push_back(e);
          for (int c = 0; c < channels; ++c) (*under)[k].push_back(data[p * channels + c]);
        }
        for (int c = 0; c < channels; ++c) {
          double& v = data[p * channels + c];
          v += a * (disk.color[c] - v);
        }
      }
    }
  }
  return img;
}

}  // namespace

ParamVector gather_params(const DiskScene& scene, const ParamLayout& layout) {
  layout.validate(scene);
  ParamVector out{layout, std::vector<double>(layout.size())};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out.values[i] = field(scene, layout.slots[i]);
  }
  return out;
}

DiskScene scatter_params(const DiskScene& scene, const ParamVector& params) {
  if (params.values.size() != params.layout.size()) {
    throw Error("scatter_params: value count does not match layout");
  }
  DiskScene out = scene;
  params.layout.validate(out);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    field(out, params.layout.slots[i]) = params.values[i];
  }
  return out;
}

ImageBuffer render(const DiskScene& scene, int width, int height) {
  return composite(scene, width, height, nullptr, nullptr);
}

ParamVector render_backward(const DiskScene& scene, int width, int height,
                            const ImageBuffer& dL_dI, const ParamLayout& layout) {
  layout.validate(scene);
  const int channels = scene.channels();
  if (dL_dI.width() != width || dL_dI.height() != height || dL_dI.channels() != channels) {
    throw Error(fmt::format("render_backward: gradient image {}x{}x{} does not match {}x{}x{}",
                            dL_dI.width(), dL_dI.height(), dL_dI.channels(), width, height,
                            channels));
  }
  std::vector<std::vector<TapeEntry>> tape;
  std::vector<std::vector<double>> under;
  composite(scene, width, height, &tape, &under);

  const std::size_t n = scene.disks.size();
  std::vector<CompensatedSum> g_cx(n), g_cy(n), g_r(n);
  std::vector<std::vector<CompensatedSum>> g_color(n, std::vector<CompensatedSum>(channels));

  // Adjoint of v <- v + a (color - v), walked front to back.
  ImageBuffer grad = dL_dI;
  auto g = grad.data();
  for (std::size_t kk = n; kk-- > 0;) {
    const Disk& disk = scene.disks[kk];
    const auto& entries = tape[kk];
    const auto& prev = under[kk];
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const TapeEntry& t = entries[e];
      double g_alpha = 0.0;
      for (int c = 0; c < channels; ++c) {
        double& gv = g[t.pixel * channels + c];
        g_alpha += gv * (disk.color[c] - prev[e * channels + c]);
        g_color[kk][c].add(gv * t.alpha);
        gv *= 1.0 - t.alpha;
      }
      if (t.slope != 0.0 && g_alpha != 0.0) {
        const double g_sd = g_alpha * t.slope;
        // sd = |p - c| - r
        g_cx[kk].add(-g_sd * t.ux);
        g_cy[kk].add(-g_sd * t.uy);
        g_r[kk].add(-g_sd);
      }
    }
  }

  ParamVector out{layout, std::vector<double>(layout.size(), 0.0)};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ParamSlot& s = layout.slots[i];
    switch (s.kind) {
      case ParamKind::center_x: out.values[i] = g_cx[s.disk].value(); break;
      case ParamKind::center_y: out.values[i] = g_cy[s.disk].value(); break;
      case ParamKind::radius: out.values[i] = g_r[s.disk].value(); break;
      case ParamKind::color: out.values[i] = g_color[s.disk][s.channel].value(); break;
    }
  }
  return out;
}

namespace {

std::vector<double> channel_list(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>()};
  return j.get<std::vector<double>>();
}

}  // namespace

void to_json(nlohmann::json& j, const DiskScene& scene) {
  j = nlohmann::json::object();
  j["background"] = scene.background;
  j["edge_width"] = scene.edge_width;
  j["edge_profile"] = scene.profile == EdgeProfile::smoothstep ? "smoothstep" : "linear";
  auto disks = nlohmann::json::array();
  for (const Disk& d : scene.disks) {
    disks.push_back({{"cx", d.cx}, {"cy", d.cy}, {"radius", d.radius}, {"color", d.color}});
  }
  j["disks"] = std::move(disks);
}

void from_json(const nlohmann::json& j, DiskScene& scene) {
  scene = DiskScene{};
  if (j.contains("background")) scene.background = channel_list(j.at("background"));
  if (j.contains("edge_width")) scene.edge_width = j.at("edge_width").get<double>();
  scene.profile = EdgeProfile::smoothstep;
  if (j.contains("edge_profile")) {
    const auto name = j.at("edge_profile").get<std::string>();
    if (name == "linear") {
      scene.profile = EdgeProfile::linear;
    } else if (name == "smoothstep") {
      scene.profile = EdgeProfile::smoothstep;
    } else {
      throw Error(fmt::format("scene: unknown edge_profile '{}'", name));
    }
  }
  for (const auto& jd : j.at("disks")) {
    Disk d;
    d.cx = jd.at("cx").get<double>();
    d.cy = jd.at("cy").get<double>();
    d.radius = jd.at("radius").get<double>();
    d.color = channel_list(jd.at("color"));
    scene.disks.push_back(std::move(d));
  }
  scene.validate();
}

}  // namespace loi
