#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "loi/core.hpp"

namespace loi {

struct Disk {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  std::vector<double> color{0.0};

  friend bool operator==(const Disk&, const Disk&) = default;
};

/// Shape of the antialiasing ramp across the edge band |d| < edge_width / 2,
/// where d is the signed distance to the disk boundary.
enum class EdgeProfile {
  linear,      // clamp(0.5 - d / w, 0, 1)
  smoothstep,  // 3t^2 - 2t^3 of the linear ramp t; C1 at the band ends
};

/// Disks composited back to front in list order over a constant background.
/// The background's length fixes the channel count.
struct DiskScene {
  std::vector<Disk> disks;
  std::vector<double> background{1.0};
  double edge_width = 1.5;
  EdgeProfile profile = EdgeProfile::smoothstep;

  int channels() const { return static_cast<int>(background.size()); }
  void validate() const;

  friend bool operator==(const DiskScene&, const DiskScene&) = default;
};

/// Coverage of a point at signed boundary distance `d`.
double edge_coverage(double d, double edge_width, EdgeProfile profile);
/// d(coverage)/dd; zero outside the open band.
double edge_coverage_slope(double d, double edge_width, EdgeProfile profile);

enum class ParamKind { center_x, center_y, radius, color };

struct ParamSlot {
  int disk = 0;
  ParamKind kind = ParamKind::center_x;
  int channel = 0;

  friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

struct ParamSelection {
  bool center_x = true;
  bool center_y = true;
  bool radius = false;
  bool color = false;
};

/// Maps flat optimisation indices onto scene fields.
struct ParamLayout {
  std::vector<ParamSlot> slots;

  static ParamLayout select(const DiskScene& scene, const ParamSelection& selection = {});
  std::size_t size() const { return slots.size(); }
  /// Throws unless every slot refers to an existing field and no field is
  /// listed twice.
  void validate(const DiskScene& scene) const;

  friend bool operator==(const ParamLayout&, const ParamLayout&) = default;
};

struct ParamVector {
  ParamLayout layout;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

ParamVector gather_params(const DiskScene& scene, const ParamLayout& layout);
/// Copy of `scene` with the layout's fields replaced by `params`.
DiskScene scatter_params(const DiskScene& scene, const ParamVector& params);

ImageBuffer render(const DiskScene& scene, int width, int height);

/// Reverse-mode derivative of render(): given dL/dI for every pixel and
/// channel, returns dL/dθ for the slots of `layout`. Only pixels inside some
/// disk's edge band feed the geometric entries.
ParamVector render_backward(const DiskScene& scene, int width, int height,
                            const ImageBuffer& dL_dI, const ParamLayout& layout);

void to_json(nlohmann::json& j, const DiskScene& scene);
void from_json(const nlohmann::json& j, DiskScene& scene);

}  // namespace loi
