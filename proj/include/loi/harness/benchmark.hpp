#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "loi/harness/config.hpp"
#include "loi/harness/experiment.hpp"

namespace loi::harness {

struct BenchmarkOptions {
  std::vector<int> ns{4, 16, 32, 64, 256};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<LossKind> methods{LossKind::loi, LossKind::gp};
  /// Geometry, scales and optimizer settings for every cell; kind and n are
  /// overwritten per cell.
  ExperimentConfig base = default_config(ExperimentKind::disk_benchmark);
  /// Per-cell artifacts go to <output_dir>/n<n>/<method>/seed_<s>/ when set.
  std::optional<std::filesystem::path> output_dir;
  /// 0: LOI_OPT_THREADS if set, else the hardware concurrency.
  int threads = 0;
};

struct BenchmarkRow {
  int n = 0;
  RunRecord run;
};

struct BenchmarkCell {
  int n = 0;
  LossKind method = LossKind::loi;
  int runs = 0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

struct BenchmarkSummary {
  std::vector<BenchmarkRow> rows;    // n-major, then method, then seed
  std::vector<BenchmarkCell> cells;  // n-major, then method
  const BenchmarkCell* find(int n, LossKind method) const;
};

/// Means per (n, method) over the rows, in first-appearance order.
std::vector<BenchmarkCell> aggregate(const std::vector<BenchmarkRow>& rows);

/// Worker count: `requested` if positive, else LOI_OPT_THREADS, else the
/// hardware concurrency; never more than `jobs`.
int worker_count(int requested, std::size_t jobs);

/// Runs all (n, method, seed) cells, in parallel up to worker_count(). Each
/// cell is exactly run_cell() on the matching disk_benchmark config, so the
/// result does not depend on the thread count.
BenchmarkSummary run_benchmark_suite(const BenchmarkOptions& options,
                                     InvariantMonitor* monitor = nullptr);

/// runs.csv: n,method,seed,psnr,ssim,param_mae,max_param_error,final_loss,steps
/// table.csv: one row per method, PSNR and SSIM columns per n.
void write_benchmark_csv(const std::filesystem::path& dir, const BenchmarkSummary& summary);

}  // namespace loi::harness
