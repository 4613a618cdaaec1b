#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "loi/harness/config.hpp"
#include "loi/objective.hpp"
#include "loi/optim.hpp"

namespace loi::harness {

struct RunRecord {
  LossKind method = LossKind::loi;
  std::uint64_t seed = 0;
  double psnr = 0.0;  // final render against the clean target render
  double ssim = 0.0;
  double param_mae = 0.0;
  double max_param_error = 0.0;  // largest |θ - θ*| over optimized slots
  double final_loss = 0.0;
  int steps = 0;
};

struct RunOutput {
  RunRecord record;
  OptResult result;
};

/// Optimizes one (method, seed) cell. With `artifact_dir` set, writes
/// initial.png, reference.png, target.png, final.png, trace.csv and
/// loss.svg there.
RunOutput run_cell(const ExperimentConfig& config, LossKind method, std::uint64_t seed,
                   const std::optional<std::filesystem::path>& artifact_dir,
                   InvariantMonitor* monitor = nullptr);

struct ExperimentResult {
  std::vector<RunRecord> runs;  // method-major, seeds in config order
};

/// Runs every method and seed of `config` under config.output_dir:
///   <method>/seed_<s>/...   per-run artifacts (see run_cell)
///   summary.csv             one row per run
///   loss.svg                first seed's loss curve for every method
/// Reruns overwrite the same files with identical bytes.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                InvariantMonitor* monitor = nullptr);

void write_summary_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs);

/// One human-readable line per method: mean PSNR/SSIM, worst parameter error.
std::vector<std::string> summary_lines(const ExperimentConfig& config,
                                       const ExperimentResult& result);

}  // namespace loi::harness
