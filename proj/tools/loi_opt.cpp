#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "loi/harness/benchmark.hpp"
#include "loi/harness/config.hpp"
#include "loi/harness/experiment.hpp"
#include "loi/harness/scenarios.hpp"
#include "loi/image_io.hpp"
#include "loi/scalespace.hpp"

using namespace loi;
using namespace loi::harness;

namespace {

constexpr double kInvariantTol = 1e-6;

// Nonzero when any histogram field violated its invariants.
int check_invariants(const InvariantMonitor& monitor) {
  const auto s = monitor.summary();
  if (s.fields == 0) return 0;
  const bool ok = s.max_mass_sum_error <= kInvariantTol && s.min_mass >= 0.0 &&
                  s.max_cdf_terminal_error <= kInvariantTol;
  std::printf("histogram fields %ld: max |sum - 1| %.3g, min mass %.3g, max |cdf end - 1| %.3g\n",
              s.fields, s.max_mass_sum_error, s.min_mass, s.max_cdf_terminal_error);
  if (!ok) {
    std::fprintf(stderr, "error: histogram invariants violated\n");
    return 3;
  }
  return 0;
}

int cmd_run(const std::string& path) {
  const ExperimentConfig config = load_config(path);
  InvariantMonitor monitor;
  const ExperimentResult result = run_experiment(config, &monitor);
  for (const std::string& line : summary_lines(config, result)) std::printf("%s\n", line.c_str());
  std::printf("artifacts in %s\n", config.output_dir.string().c_str());
  return check_invariants(monitor);
}

struct BenchArgs {
  std::vector<int> ns{4, 16, 32, 64, 256};
  int seeds = 10;
  std::vector<std::string> methods{"loi", "gp", "mse"};
  std::string out = "out/bench";
  int iters = -1;
  double lr = -1.0;
  double final_lr_factor = -1.0;
  int size = 128;
  bool no_artifacts = false;
};

int cmd_bench(const BenchArgs& a) {
  BenchmarkOptions opt;
  opt.ns = a.ns;
  opt.seeds.clear();
  for (int s = 0; s < a.seeds; ++s) opt.seeds.push_back(static_cast<std::uint64_t>(s));
  opt.methods.clear();
  for (const std::string& m : a.methods) opt.methods.push_back(parse_loss_kind(m));
  opt.base.width = opt.base.height = a.size;
  if (a.iters >= 0) opt.base.optimizer.max_iters = a.iters;
  if (a.lr > 0.0) opt.base.optimizer.lr = a.lr;
  if (a.final_lr_factor > 0.0) opt.base.optimizer.final_lr_factor = a.final_lr_factor;
  if (!a.no_artifacts) opt.output_dir = std::filesystem::path(a.out);

  InvariantMonitor monitor;
  const auto t0 = std::chrono::steady_clock::now();
  const BenchmarkSummary summary = run_benchmark_suite(opt, &monitor);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_benchmark_csv(a.out, summary);

  std::printf("%-8s", "method");
  for (int n : opt.ns) std::printf(" | n=%-3d PSNR  SSIM", n);
  std::printf("\n");
  for (LossKind m : opt.methods) {
    std::printf("%-8s", to_string(m).c_str());
    for (int n : opt.ns) {
      const BenchmarkCell* c = summary.find(n, m);
      std::printf(" | %10.2f %5.3f", c->mean_psnr, c->mean_ssim);
    }
    std::printf("\n");
  }
  std::printf("%zu runs in %.1f s with %d worker(s); tables in %s\n", summary.rows.size(), secs,
              worker_count(opt.threads, summary.rows.size()), a.out.c_str());
  return check_invariants(monitor);
}

int cmd_gradcheck(std::uint64_t seed, double h, double tol) {
  const Problem problem = gradcheck_problem(seed);
  const Evaluator evaluator(problem);
  const ParamVector params = gather_params(problem.initial, problem.layout);
  const GradientResult analytic = evaluator.gradient(params);
  const ParamVector fd = finite_diff_gradient(evaluator, params, h);
  std::printf("seed %llu: %zu disks, loss %.6g, h = %g px\n",
              static_cast<unsigned long long>(seed), problem.initial.disks.size(), analytic.loss,
              h);
  std::printf("%5s %5s %4s %15s %15s %10s\n", "coord", "disk", "axis", "analytic", "finite-diff",
              "rel err");
  int failures = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double a = analytic.grad.values[i], f = fd.values[i];
    const double denom = std::max(std::abs(a), std::abs(f));
    const double rel = denom > 0.0 ? std::abs(a - f) / denom : 0.0;
    const bool checked = std::abs(a) > 1e-8;
    const bool bad = checked && rel > tol;
    failures += bad;
    const ParamSlot& s = problem.layout.slots[i];
    std::printf("%5zu %5d %4s %15.8e %15.8e %10.3e%s\n", i, s.disk,
                s.kind == ParamKind::center_x ? "x" : "y", a, f, rel,
                !checked ? "  (|g| <= 1e-8, skipped)" : (bad ? "  FAIL" : ""));
  }
  std::printf("%s: %d coordinate(s) above relative error %g\n", failures ? "FAIL" : "PASS",
              failures, tol);
  return failures ? 2 : 0;
}

int cmd_dump(const std::string& image, const std::string& out, double sigma, double alpha,
             double beta) {
  ImageBuffer img = read_png(image);
  std::filesystem::create_directories(out);
  ScaleConfig cfg;
  cfg.sigmas = {sigma};
  cfg.alphas = {alpha};
  cfg.betas = {beta};
  cfg.validate();
  for (const LOIField& f : build_loi(img, cfg)) {
    const auto path = std::filesystem::path(out) /
                      fmt::format("loi_c{}_s{}_a{}_b{}.png", f.channel, f.sigma, f.alpha, f.beta);
    dump_field_png(path, f);
    std::printf("%s (%d bins)\n", path.string().c_str(), f.bins);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse rendering of disk scenes with locally orderless image losses"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment config (JSON)");
  run->add_option("config", config_path, "Experiment config file")->required();

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Disk-position benchmark over n, seeds and methods");
  bench->add_option("--n", bench_args.ns, "Disk counts")->delimiter(',');
  bench->add_option("--seeds", bench_args.seeds, "Number of seeds (0..k-1)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--methods", bench_args.methods, "Losses: loi, gp, mse")->delimiter(',');
  bench->add_option("--out", bench_args.out, "Output directory");
  bench->add_option("--iters", bench_args.iters, "Adam steps per run");
  bench->add_option("--lr", bench_args.lr, "Adam learning rate (normalized units)");
  bench->add_option("--final-lr-factor", bench_args.final_lr_factor,
                    "Learning-rate decay factor reached at the last step");
  bench->add_option("--size", bench_args.size, "Image width and height")
      ->check(CLI::PositiveNumber);
  bench->add_flag("--no-artifacts", bench_args.no_artifacts,
                  "Only write runs.csv and table.csv");

  std::uint64_t gc_seed = 0;
  double gc_h = 1e-3, gc_tol = 5e-3;
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck->add_option("--seed", gc_seed, "Problem seed");
  gradcheck->add_option("--step", gc_h, "Finite-difference step in pixels");
  gradcheck->add_option("--tol", gc_tol, "Relative error tolerance");

  std::string dump_image, dump_out = "out/dump";
  double dump_sigma = 0.0, dump_alpha = 0.0, dump_beta = 0.125;
  auto* dump = app.add_subcommand("dump", "Write the bin planes of an image's LOI as PNGs");
  dump->add_option("image", dump_image, "Input PNG")->required();
  dump->add_option("--out", dump_out, "Output directory");
  dump->add_option("--sigma", dump_sigma, "Inner scale");
  dump->add_option("--alpha", dump_alpha, "Extent scale");
  dump->add_option("--beta", dump_beta, "Tonal bin width");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path);
    if (*bench) return cmd_bench(bench_args);
    if (*gradcheck) return cmd_gradcheck(gc_seed, gc_h, gc_tol);
    if (*dump) return cmd_dump(dump_image, dump_out, dump_sigma, dump_alpha, dump_beta);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
