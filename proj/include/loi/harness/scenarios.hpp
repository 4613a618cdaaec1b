#pragma once

#include <cstdint>

#include "loi/harness/config.hpp"
#include "loi/optim.hpp"

namespace loi::harness {

struct GridShape {
  int rows = 0;
  int cols = 0;
};

/// Factorization rows x cols = n closest to square, rows <= cols. Throws
/// unless n is one of kBenchmarkCounts.
GridShape benchmark_grid(int n);

/// Target scene: disk i sits at the center of grid cell i (row-major) with
/// radius 0.35 * min(cell width, cell height). Intensities are (j + 1) / n
/// for j = 0..n-1 over a black background, dealt to cells by a fixed
/// shuffle so that neighbouring cells differ in brightness.
DiskScene benchmark_targets(int n, int width, int height);

/// Targets from benchmark_targets(); every start center is drawn uniformly
/// inside the image from `seed`. Centers are optimized, colors are known.
Problem generate_disk_benchmark(int n, std::uint64_t seed, int width = 128, int height = 128);

/// The problem one run of `config` solves with loss `method` and `seed`.
/// The seed picks the start state (disk_benchmark) or the reference noise
/// (fig5_noise).
Problem make_problem(const ExperimentConfig& config, LossKind method, std::uint64_t seed);

/// Seeded 64 x 64 gradient-check problem with 1 to 4 disks: random targets
/// and a start state moved up to 12 px from them.
Problem gradcheck_problem(std::uint64_t seed);

}  // namespace loi::harness
