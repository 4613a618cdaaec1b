#include "loi/harness/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

namespace loi::harness {

GridShape benchmark_grid(int n) {
  if (std::find(kBenchmarkCounts.begin(), kBenchmarkCounts.end(), n) == kBenchmarkCounts.end()) {
    throw Error(fmt::format("disk benchmark: n = {} is not one of 4, 16, 32, 64, 256", n));
  }
  int rows = static_cast<int>(std::sqrt(static_cast<double>(n)));
  while (n % rows != 0) --rows;
  return {rows, n / rows};
}

DiskScene benchmark_targets(int n, int width, int height) {
  const GridShape grid = benchmark_grid(n);
  const double cw = static_cast<double>(width) / grid.cols;
  const double ch = static_cast<double>(height) / grid.rows;
  const double radius = 0.35 * std::min(cw, ch);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle(0x10c0105ULL);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(shuffle.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }

  DiskScene scene;
  scene.background = {0.0};
  for (int i = 0; i < n; ++i) {
    Disk d;
    d.cx = (i % grid.cols + 0.5) * cw;
    d.cy = (i / grid.cols + 0.5) * ch;
    d.radius = radius;
    d.color = {(order[i] + 1.0) / n};
    scene.disks.push_back(d);
  }
  return scene;
}

Problem generate_disk_benchmark(int n, std::uint64_t seed, int width, int height) {
  Problem p;
  p.ground_truth = benchmark_targets(n, width, height);
  p.initial = p.ground_truth;
  Rng rng(seed);
  for (Disk& d : p.initial.disks) {
    d.cx = rng.uniform(0.0, width);
    d.cy = rng.uniform(0.0, height);
  }
  p.reference = render(p.ground_truth, width, height);
  p.layout = ParamLayout::select(p.ground_truth);
  return p;
}

namespace {

DiskScene row_scene(double background, std::initializer_list<Disk> disks) {
  DiskScene s;
  s.background = {background};
  s.disks = disks;
  return s;
}

// 1D scenes live on the middle row of a height-1 image; only cx moves.
void fig_scenes(const ExperimentConfig& c, DiskScene& target, DiskScene& start) {
  const double y = 0.5 * c.height;
  switch (c.kind) {
    case ExperimentKind::fig3_1d:
      // Dark disk 30 px to the left of its target: no overlap at the start.
      target = row_scene(1.0, {{79.0, y, 8.0, {0.0}}});
      start = row_scene(1.0, {{49.0, y, 8.0, {0.0}}});
      break;
    case ExperimentKind::fig4_tonal:
      // A dark and a bright disk that have to pass each other; their mean
      // equals the background.
      target = row_scene(0.5, {{30.0, y, 6.0, {0.1}}, {98.0, y, 6.0, {0.9}}});
      start = row_scene(0.5, {{98.0, y, 6.0, {0.1}}, {30.0, y, 6.0, {0.9}}});
      break;
    case ExperimentKind::fig5_noise:
      target = row_scene(0.75, {{64.0, y, 10.0, {0.25}}});
      start = row_scene(0.75, {{34.0, y, 10.0, {0.25}}});
      break;
    default: throw Error("fig_scenes: not a 1D figure experiment");
  }
}

}  // namespace

Problem make_problem(const ExperimentConfig& config, LossKind method, std::uint64_t seed) {
  config.validate();
  Problem p;
  switch (config.kind) {
    case ExperimentKind::disk_benchmark:
      p = generate_disk_benchmark(config.n, seed, config.width, config.height);
      break;
    case ExperimentKind::custom:
      p.ground_truth = *config.scene;
      p.initial = config.initial ? *config.initial : *config.scene;
      p.layout = ParamLayout::select(p.ground_truth, config.params);
      break;
    default: {
      fig_scenes(config, p.ground_truth, p.initial);
      ParamSelection only_x;
      only_x.center_y = false;
      p.layout = ParamLayout::select(p.ground_truth, only_x);
      break;
    }
  }
  p.reference = render(p.ground_truth, config.width, config.height);
  if (config.noise_stddev > 0.0) {
    p.reference = add_gaussian_noise(p.reference, config.noise_stddev, seed);
  }
  p.loss = method;
  p.config = config.effective_scales();
  p.validate();
  return p;
}

Problem gradcheck_problem(std::uint64_t seed) {
  Rng rng(1000 + seed);
  const int count = 1 + static_cast<int>(seed % 4);
  Problem p;
  p.ground_truth.background = {rng.uniform(0.6, 1.0)};
  for (int i = 0; i < count; ++i) {
    Disk d;
    d.cx = rng.uniform(12.0, 52.0);
    d.cy = rng.uniform(12.0, 52.0);
    d.radius = rng.uniform(5.0, 10.0);
    d.color = {rng.uniform(0.0, 0.5)};
    p.ground_truth.disks.push_back(d);
  }
  p.initial = p.ground_truth;
  for (Disk& d : p.initial.disks) {
    d.cx += rng.uniform(-12.0, 12.0);
    d.cy += rng.uniform(-12.0, 12.0);
  }
  p.reference = render(p.ground_truth, 64, 64);
  p.layout = ParamLayout::select(p.initial);
  p.loss = LossKind::loi;
  return p;
}

}  // namespace loi::harness
