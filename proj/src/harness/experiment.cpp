#include "loi/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/core.h>

#include "loi/harness/report.hpp"
#include "loi/harness/scenarios.hpp"
#include "loi/image_io.hpp"

namespace loi::harness {

namespace {

double max_slot_error(const ParamVector& params, const DiskScene& truth) {
  const ParamVector ref = gather_params(truth, params.layout);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    worst = std::max(worst, std::abs(params.values[i] - ref.values[i]));
  }
  return worst;
}

// SSIM needs a full 7x7 window; 1D runs report it as missing.
double ssim_or_nan(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width() < 7 || a.height() < 7) return std::numeric_limits<double>::quiet_NaN();
  return ssim(a, b);
}

std::string field(double v) { return std::isnan(v) ? std::string() : format_number(v); }

}  // namespace

RunOutput run_cell(const ExperimentConfig& config, LossKind method, std::uint64_t seed,
                   const std::optional<std::filesystem::path>& artifact_dir,
                   InvariantMonitor* monitor) {
  const Problem problem = make_problem(config, method, seed);
  RunOutput out;
  out.result = optimize(problem, config.optimizer, seed, monitor);

  const int w = problem.width(), h = problem.height();
  const ImageBuffer target = render(problem.ground_truth, w, h);
  const ImageBuffer final_img = render(out.result.final_scene, w, h);
  RunRecord& r = out.record;
  r.method = method;
  r.seed = seed;
  r.psnr = psnr(final_img, target);
  r.ssim = ssim_or_nan(final_img, target);
  r.param_mae = param_mae(out.result.final_params, problem.ground_truth);
  r.max_param_error = max_slot_error(out.result.final_params, problem.ground_truth);
  r.final_loss = out.result.trace.iterations.back().loss;
  r.steps = out.result.trace.iterations.back().step;

  if (artifact_dir) {
    std::filesystem::create_directories(*artifact_dir);
    write_png(*artifact_dir / "initial.png", render(problem.initial, w, h));
    write_png(*artifact_dir / "reference.png", problem.reference);
    write_png(*artifact_dir / "target.png", target);
    write_png(*artifact_dir / "final.png", final_img);
    write_trace_csv(*artifact_dir / "trace.csv", out.result.trace);
    write_loss_svg(*artifact_dir / "loss.svg",
                   fmt::format("{} {} seed {}", to_string(config.kind), loi::to_string(method),
                               seed),
                   {{loi::to_string(method), out.result.trace}});
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<RunRecord>& runs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  CsvWriter csv(out);
  csv.row({"method", "seed", "psnr", "ssim", "param_mae", "max_param_error", "final_loss",
           "steps"});
  for (const RunRecord& r : runs) {
    csv.row({loi::to_string(r.method), std::to_string(r.seed), field(r.psnr), field(r.ssim),
             field(r.param_mae), field(r.max_param_error), field(r.final_loss),
             std::to_string(r.steps)});
  }
}

ExperimentResult run_experiment(const ExperimentConfig& config, InvariantMonitor* monitor) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  {
    std::ofstream cfg(config.output_dir / "config.json", std::ios::binary | std::ios::trunc);
    cfg << to_json(config).dump(2) << "\n";
  }
  ExperimentResult result;
  std::vector<Curve> curves;
  for (LossKind method : config.methods) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      const std::uint64_t seed = config.seeds[i];
      const auto dir = config.output_dir / loi::to_string(method) / fmt::format("seed_{}", seed);
      RunOutput run = run_cell(config, method, seed, dir, monitor);
      if (i == 0) curves.push_back({loi::to_string(method), run.result.trace});
      result.runs.push_back(run.record);
    }
  }
  write_summary_csv(config.output_dir / "summary.csv", result.runs);
  write_loss_svg(config.output_dir / "loss.svg",
                 fmt::format("{} (seed {})", to_string(config.kind), config.seeds.front()), curves);
  std::ofstream txt(config.output_dir / "summary.txt", std::ios::binary | std::ios::trunc);
  for (const std::string& line : summary_lines(config, result)) txt << line << "\n";
  return result;
}

std::vector<std::string> summary_lines(const ExperimentConfig& config,
                                       const ExperimentResult& result) {
  std::vector<std::string> lines;
  for (LossKind method : config.methods) {
    int runs = 0, recovered = 0;
    double psnr_sum = 0.0, ssim_sum = 0.0, worst = 0.0;
    for (const RunRecord& r : result.runs) {
      if (r.method != method) continue;
      ++runs;
      psnr_sum += r.psnr;
      ssim_sum += r.ssim;
      worst = std::max(worst, r.max_param_error);
      if (r.max_param_error < 1.0) ++recovered;
    }
    if (runs == 0) continue;
    const double mean_ssim = ssim_sum / runs;
    lines.push_back(fmt::format(
        "{} {}: runs {}, mean psnr {:.2f} dB, mean ssim {}, worst param error {:.4f} px, "
        "within 1 px {}/{}",
        to_string(config.kind), loi::to_string(method), runs, psnr_sum / runs,
        std::isnan(mean_ssim) ? std::string("n/a") : fmt::format("{:.4f}", mean_ssim), worst,
        recovered, runs));
  }
  return lines;
}

}  // namespace loi::harness
