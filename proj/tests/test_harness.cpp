#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "loi/harness/benchmark.hpp"
#include "loi/harness/config.hpp"
#include "loi/harness/experiment.hpp"
#include "loi/harness/report.hpp"
#include "loi/harness/scenarios.hpp"

using namespace loi;
using namespace loi::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "loi_test_harness" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool same_number(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_record(const RunRecord& a, const RunRecord& b) {
  return a.method == b.method && a.seed == b.seed && same_number(a.psnr, b.psnr) &&
         same_number(a.ssim, b.ssim) && a.param_mae == b.param_mae &&
         a.max_param_error == b.max_param_error && a.final_loss == b.final_loss &&
         a.steps == b.steps;
}

ExperimentConfig quick_benchmark(int n, int iters) {
  ExperimentConfig c = default_config(ExperimentKind::disk_benchmark);
  c.n = n;
  c.seeds = {0, 1};
  c.optimizer.max_iters = iters;
  return c;
}

}  // namespace

TEST_CASE("benchmark grid") {
  CHECK(benchmark_grid(4).rows == 2);
  CHECK(benchmark_grid(4).cols == 2);
  CHECK(benchmark_grid(16).rows == 4);
  CHECK(benchmark_grid(32).rows == 4);
  CHECK(benchmark_grid(32).cols == 8);
  CHECK(benchmark_grid(64).cols == 8);
  CHECK(benchmark_grid(256).rows == 16);
  CHECK_THROWS_AS(benchmark_grid(9), Error);
  CHECK_THROWS_AS(benchmark_grid(0), Error);
}

TEST_CASE("benchmark targets") {
  const DiskScene four = benchmark_targets(4, 128, 128);
  REQUIRE(four.disks.size() == 4);
  CHECK(four.background == std::vector<double>{0.0});
  for (const Disk& d : four.disks) CHECK(d.radius == doctest::Approx(22.4));
  CHECK(four.disks[0].cx == 32.0);
  CHECK(four.disks[3].cy == 96.0);

  for (int n : kBenchmarkCounts) {
    const DiskScene s = benchmark_targets(n, 128, 128);
    REQUIRE(static_cast<int>(s.disks.size()) == n);
    std::set<double> colors;
    for (const Disk& d : s.disks) colors.insert(d.color[0]);
    CHECK(static_cast<int>(colors.size()) == n);
    CHECK(*colors.begin() == doctest::Approx(1.0 / n));
    CHECK(*colors.rbegin() == 1.0);
    for (std::size_t i = 0; i < s.disks.size(); ++i) {
      for (std::size_t j = i + 1; j < s.disks.size(); ++j) {
        const Disk &a = s.disks[i], &b = s.disks[j];
        CHECK(std::hypot(a.cx - b.cx, a.cy - b.cy) > a.radius + b.radius);
      }
    }
  }
}

TEST_CASE("benchmark problems") {
  const Problem a = generate_disk_benchmark(16, 3), b = generate_disk_benchmark(16, 3);
  CHECK(a.initial == b.initial);
  CHECK(a.reference == b.reference);
  CHECK_FALSE(generate_disk_benchmark(16, 4).initial == a.initial);
  CHECK(a.ground_truth == benchmark_targets(16, 128, 128));
  CHECK(a.layout.size() == 32);
  for (std::size_t i = 0; i < a.initial.disks.size(); ++i) {
    const Disk& d = a.initial.disks[i];
    CHECK(d.cx >= 0.0);
    CHECK(d.cx < 128.0);
    CHECK(d.cy >= 0.0);
    CHECK(d.cy < 128.0);
    CHECK(d.radius == a.ground_truth.disks[i].radius);
    CHECK(d.color == a.ground_truth.disks[i].color);
  }
  CHECK_THROWS_AS(generate_disk_benchmark(10, 0), Error);
}

TEST_CASE("gradcheck problems") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Problem p = gradcheck_problem(seed);
    CHECK(p.width() == 64);
    CHECK(p.height() == 64);
    CHECK(static_cast<int>(p.initial.disks.size()) == 1 + static_cast<int>(seed % 4));
    CHECK(p.loss == LossKind::loi);
    CHECK(p.initial == gradcheck_problem(seed).initial);
  }
}

TEST_CASE("scripted 1D scenes") {
  for (ExperimentKind k : {ExperimentKind::fig3_1d, ExperimentKind::fig4_tonal, ExperimentKind::fig5_noise}) {
    const ExperimentConfig c = default_config(k);
    CHECK(c.height == 1);
    const Problem p = make_problem(c, c.methods.front(), 0);
    CHECK(p.layout.size() == p.initial.disks.size());
    for (const ParamSlot& s : p.layout.slots) CHECK(s.kind == ParamKind::center_x);
  }
  const ExperimentConfig fig3 = default_config(ExperimentKind::fig3_1d);
  const Problem p3 = make_problem(fig3, LossKind::loi, 0);
  CHECK(std::abs(p3.initial.disks[0].cx - p3.ground_truth.disks[0].cx) == 30.0);

  const ExperimentConfig fig5 = default_config(ExperimentKind::fig5_noise);
  const Problem n0 = make_problem(fig5, LossKind::loi, 0), n1 = make_problem(fig5, LossKind::loi, 1);
  CHECK_FALSE(n0.reference == n1.reference);
  CHECK(n0.reference == make_problem(fig5, LossKind::mse, 0).reference);
  CHECK_FALSE(n0.reference == render(n0.ground_truth, fig5.width, fig5.height));
}

TEST_CASE("config defaults and validation") {
  const ExperimentConfig b = default_config(ExperimentKind::disk_benchmark);
  CHECK(b.width == 128);
  CHECK(b.height == 128);
  CHECK(b.seeds.size() == 10);
  CHECK(b.scales.sigmas == std::vector<double>{1, 5, 15, 45});
  CHECK(b.scales.alphas == std::vector<double>{1, 5, 15});
  CHECK(b.scales.betas == std::vector<double>{0.125});
  CHECK_NOTHROW(b.validate());

  ExperimentConfig bad = b;
  bad.n = 20;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = b;
  bad.seeds.clear();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = b;
  bad.methods = {LossKind::loi, LossKind::loi};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = default_config(ExperimentKind::fig3_1d);
  bad.height = 4;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(default_config(ExperimentKind::custom).validate(), Error);
}

TEST_CASE("config parsing") {
  using nlohmann::json;
  const json j = json::parse(R"({
    "schema": 1, "experiment": "disk_benchmark", "n": 64, "seeds": 3,
    "methods": ["gp", "loi"], "scales": {"sigmas": [1, 5], "beta": 0.25},
    "optimizer": {"lr": 0.02, "max_iters": 40, "gradient": "smoothed"},
    "output_dir": "results/b"})");
  const ExperimentConfig c = parse_config(j, "/data");
  CHECK(c.kind == ExperimentKind::disk_benchmark);
  CHECK(c.n == 64);
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(c.methods == std::vector<LossKind>{LossKind::gp, LossKind::loi});
  CHECK(c.scales.sigmas == std::vector<double>{1, 5});
  CHECK(c.scales.alphas == std::vector<double>{1, 5, 15});
  CHECK(c.scales.betas == std::vector<double>{0.25});
  CHECK(c.optimizer.lr == 0.02);
  CHECK(c.optimizer.max_iters == 40);
  CHECK(c.optimizer.source == GradientSource::smoothed);
  CHECK(c.output_dir == fs::path("/data/results/b"));

  const ExperimentConfig back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  CHECK(parse_config(json::parse(R"({"schema": 1, "experiment": "fig3_1d", "seeds": [4, 7]})"))
            .seeds == std::vector<std::uint64_t>{4, 7});
  CHECK_THROWS_AS(parse_config(json::parse(R"({"experiment": "fig3_1d"})")), Error);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"schema": 2, "experiment": "fig3_1d"})")), Error);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"schema": 1, "experiment": "fig3_1d", "colour": 1})")),
                  Error);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"schema": 1, "experiment": "fig9"})")), Error);
  CHECK_THROWS_AS(
      parse_config(json::parse(R"({"schema": 1, "experiment": "fig3_1d", "optimizer": {"momentum": 1}})")),
      Error);

  const json custom = json::parse(R"({
    "schema": 1, "experiment": "custom", "width": 32, "height": 32,
    "scene": {"background": [1], "disks": [{"cx": 10, "cy": 12, "radius": 4, "color": [0]}]},
    "initial": {"background": [1], "disks": [{"cx": 14, "cy": 12, "radius": 4, "color": [0]}]},
    "params": {"center_y": false}})");
  const ExperimentConfig cc = parse_config(custom);
  const Problem p = make_problem(cc, LossKind::loi, 0);
  REQUIRE(p.layout.size() == 1);
  CHECK(p.initial.disks[0].cx == 14);
}

TEST_CASE("config files") {
  const fs::path dir = scratch("config_files");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"schema": 1, "experiment": "fig4_tonal", "output_dir": "o"})";
    std::ofstream(dir / "broken.json") << R"({"schema": 1, )";
  }
  const ExperimentConfig c = load_config(dir / "ok.json");
  CHECK(c.kind == ExperimentKind::fig4_tonal);
  CHECK(c.output_dir == dir / "o");
  CHECK_THROWS_AS(load_config(dir / "broken.json"), Error);
  CHECK_THROWS_AS(load_config(dir / "absent.json"), Error);
}

TEST_CASE("ablations") {
  ExperimentConfig c = default_config(ExperimentKind::fig4_tonal);
  c.ablation = Ablation::beta_only;
  CHECK(c.effective_scales().sigmas == std::vector<double>{0.0});
  CHECK(c.effective_scales().alphas == std::vector<double>{0.0});
  c.ablation = Ablation::no_extent;
  CHECK(c.effective_scales().sigmas == c.scales.sigmas);
  CHECK(c.effective_scales().alphas == std::vector<double>{0.0});
  for (Ablation a : {Ablation::none, Ablation::beta_only, Ablation::no_extent}) {
    CHECK(parse_ablation(to_string(a)) == a);
  }
}

TEST_CASE("csv and numbers") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333333333");
  CHECK(std::stod(format_number(M_PI)) == M_PI);
  std::ostringstream os;
  CsvWriter csv(os);
  csv.row({"a", "b,c", "say \"hi\"", "two\nlines", ""});
  CHECK(os.str() == "a,\"b,c\",\"say \"\"hi\"\"\",\"two\nlines\",\r\n");
}

TEST_CASE("trace csv round trip") {
  const fs::path dir = scratch("trace");
  fs::create_directories(dir);
  OptTrace t;
  t.push({0, 0.5, 12.25, 18.0});
  t.push({1, 1.0 / 3.0, 1e-17, 99.0});
  write_trace_csv(dir / "trace.csv", t);
  CHECK(slurp(dir / "trace.csv").rfind("step,loss,param_mae,psnr\r\n", 0) == 0);
  CHECK(read_trace_csv(dir / "trace.csv") == t);
}

TEST_CASE("loss svg") {
  const fs::path dir = scratch("svg");
  fs::create_directories(dir);
  OptTrace a, b;
  for (int i = 0; i < 50; ++i) {
    a.push({i, std::exp(-0.1 * i), 0, 0});
    b.push({i, 1.0 / (1 + i), 0, 0});
  }
  write_loss_svg(dir / "loss.svg", "two <curves>", {{"loi", a}, {"gp", b}});
  const std::string svg = slurp(dir / "loss.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("version=\"1.1\"") != std::string::npos);
  CHECK(svg.find("two &lt;curves&gt;") != std::string::npos);
  CHECK(svg.find(">loi<") != std::string::npos);
  CHECK(svg.find(">gp<") != std::string::npos);
  std::size_t polylines = 0;
  for (std::size_t pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) {
    ++polylines;
  }
  CHECK(polylines == 2);
  CHECK(svg.find("</svg>") != std::string::npos);

  OptTrace zero;
  zero.push({0, 0.0, 0, 0});
  zero.push({1, 0.0, 0, 0});
  CHECK_NOTHROW(write_loss_svg(dir / "flat.svg", "flat", {{"mse", zero}}));
}

TEST_CASE("run experiment") {
  ExperimentConfig c = default_config(ExperimentKind::fig3_1d);
  c.output_dir = scratch("fig3");
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.runs.size() == 2);
  CHECK(r.runs[0].method == LossKind::loi);
  CHECK(r.runs[0].param_mae < 0.5);
  CHECK(r.runs[1].method == LossKind::mse);
  CHECK(r.runs[1].param_mae >= 29.0);
  CHECK(std::isnan(r.runs[0].ssim));

  for (const char* f : {"config.json", "summary.csv", "summary.txt", "loss.svg", "loi/seed_0/initial.png",
                        "loi/seed_0/reference.png", "loi/seed_0/target.png", "loi/seed_0/final.png",
                        "loi/seed_0/trace.csv", "loi/seed_0/loss.svg", "mse/seed_0/final.png"}) {
    CHECK_MESSAGE(fs::exists(c.output_dir / f), f);
  }
  const std::string summary = slurp(c.output_dir / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 3);
  const auto lines = summary_lines(c, r);
  CHECK(lines.size() == 2);

  // The saved config reproduces the run.
  const ExperimentConfig again = load_config(c.output_dir / "config.json");
  CHECK(to_json(again) == to_json(c));
}

TEST_CASE("benchmark experiment writes one row per method and seed") {
  ExperimentConfig c = quick_benchmark(16, 3);
  c.output_dir = scratch("bench16");
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.runs.size() == 4);
  CHECK(r.runs[0].method == LossKind::loi);
  CHECK(r.runs[2].method == LossKind::gp);
  CHECK(r.runs[3].seed == 1);
  for (const RunRecord& run : r.runs) {
    CHECK(run.steps == 3);
    CHECK(std::isfinite(run.ssim));
  }
  const std::string summary = slurp(c.output_dir / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);

  // Rerunning overwrites with the same bytes.
  const std::string png = slurp(c.output_dir / "gp/seed_1/final.png");
  const std::string trace = slurp(c.output_dir / "loi/seed_0/trace.csv");
  run_experiment(c);
  CHECK(slurp(c.output_dir / "gp/seed_1/final.png") == png);
  CHECK(slurp(c.output_dir / "loi/seed_0/trace.csv") == trace);
  CHECK(slurp(c.output_dir / "summary.csv") == summary);
}

TEST_CASE("benchmark suite") {
  BenchmarkOptions opt;
  opt.ns = {4, 16};
  opt.seeds = {0, 1};
  opt.base.optimizer.max_iters = 2;
  opt.threads = 1;
  const BenchmarkSummary one = run_benchmark_suite(opt);
  REQUIRE(one.rows.size() == 8);
  REQUIRE(one.cells.size() == 4);
  CHECK(one.rows[0].n == 4);
  CHECK(one.rows[4].n == 16);

  for (const BenchmarkCell& cell : one.cells) {
    double psnr = 0, ssim = 0;
    int count = 0;
    for (const BenchmarkRow& row : one.rows) {
      if (row.n != cell.n || row.run.method != cell.method) continue;
      psnr += row.run.psnr;
      ssim += row.run.ssim;
      ++count;
    }
    CHECK(count == cell.runs);
    CHECK(std::abs(cell.mean_psnr - psnr / count) < 1e-9);
    CHECK(std::abs(cell.mean_ssim - ssim / count) < 1e-9);
  }
  CHECK(one.find(16, LossKind::gp) != nullptr);
  CHECK(one.find(64, LossKind::gp) == nullptr);

  opt.threads = 3;
  const BenchmarkSummary three = run_benchmark_suite(opt);
  REQUIRE(three.rows.size() == one.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(three.rows[i].n == one.rows[i].n);
    CHECK(same_record(three.rows[i].run, one.rows[i].run));
  }

  const fs::path dir = scratch("suite_csv");
  write_benchmark_csv(dir, one);
  const std::string table = slurp(dir / "table.csv");
  CHECK(table.rfind("method,psnr_n4,ssim_n4,psnr_n16,ssim_n16\r\n", 0) == 0);
  const std::string runs = slurp(dir / "runs.csv");
  CHECK(std::count(runs.begin(), runs.end(), '\n') == 9);

  opt.methods.clear();
  CHECK_THROWS_AS(run_benchmark_suite(opt), Error);
}

TEST_CASE("single-seed suite equals the experiment") {
  BenchmarkOptions opt;
  opt.ns = {16};
  opt.seeds = {5};
  opt.base.optimizer.max_iters = 3;
  opt.output_dir = scratch("suite_single");
  const BenchmarkSummary s = run_benchmark_suite(opt);

  ExperimentConfig c = opt.base;
  c.n = 16;
  c.seeds = {5};
  c.output_dir = scratch("experiment_single");
  const ExperimentResult r = run_experiment(c);
  REQUIRE(s.rows.size() == r.runs.size());
  for (std::size_t i = 0; i < r.runs.size(); ++i) CHECK(same_record(s.rows[i].run, r.runs[i]));
  for (const BenchmarkCell& cell : s.cells) CHECK(cell.mean_psnr == s.rows[cell.method == LossKind::loi ? 0 : 1].run.psnr);
  CHECK(slurp(*opt.output_dir / "n16/loi/seed_5/final.png") == slurp(c.output_dir / "loi/seed_5/final.png"));
  CHECK(slurp(*opt.output_dir / "n16/gp/seed_5/trace.csv") == slurp(c.output_dir / "gp/seed_5/trace.csv"));
}

TEST_CASE("worker count") {
  CHECK(worker_count(3, 10) == 3);
  CHECK(worker_count(8, 2) == 2);
  CHECK(worker_count(1, 0) == 1);
  // ctest sets LOI_OPT_THREADS=2 for this binary.
  const char* env = std::getenv("LOI_OPT_THREADS");
  if (env && std::string(env) == "2") {
    CHECK(worker_count(0, 10) == 2);
  }
  setenv("LOI_OPT_THREADS", "5", 1);
  CHECK(worker_count(0, 10) == 5);
  CHECK(worker_count(0, 4) == 4);
  setenv("LOI_OPT_THREADS", "zero", 1);
  CHECK_THROWS_AS(worker_count(0, 4), Error);
  setenv("LOI_OPT_THREADS", "0", 1);
  CHECK_THROWS_AS(worker_count(0, 4), Error);
  if (env) {
    setenv("LOI_OPT_THREADS", env, 1);
  } else {
    unsetenv("LOI_OPT_THREADS");
  }
}
