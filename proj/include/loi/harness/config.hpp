#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loi/core.hpp"
#include "loi/optim.hpp"
#include "loi/render2d.hpp"

namespace loi::harness {

inline constexpr int kSchemaVersion = 1;

enum class ExperimentKind { fig3_1d, fig4_tonal, fig5_noise, disk_benchmark, custom };
ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

/// Scale-space switches applied on top of the configured scales.
///   beta_only: sigmas = [0], alphas = [0]
///   no_extent: alphas = [0]
/// The sigma-only ablation is the gp loss.
enum class Ablation { none, beta_only, no_extent };
Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation ablation);

/// Disk counts the benchmark generator accepts.
inline const std::vector<int> kBenchmarkCounts{4, 16, 32, 64, 256};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::custom;
  int width = 128;
  int height = 128;
  int n = 16;  // disk_benchmark only
  std::vector<std::uint64_t> seeds{0};
  std::vector<LossKind> methods{LossKind::loi};
  ScaleConfig scales;
  Ablation ablation = Ablation::none;
  OptimizerSettings optimizer;
  double noise_stddev = 0.0;
  std::filesystem::path output_dir = "out";
  /// custom only: target scene, optional start scene (defaults to the target)
  /// and which parameters are optimized.
  std::optional<DiskScene> scene;
  std::optional<DiskScene> initial;
  ParamSelection params;

  /// Scales after the ablation switch.
  ScaleConfig effective_scales() const;
  void validate() const;
};

/// Defaults for each scripted experiment: geometry, methods and budgets.
ExperimentConfig default_config(ExperimentKind kind);

/// Keys absent from `j` keep the defaults of its "experiment" kind. Relative
/// output directories resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace loi::harness
