#include "loi/harness/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <fmt/core.h>

#include "loi/harness/report.hpp"

namespace loi::harness {

const BenchmarkCell* BenchmarkSummary::find(int n, LossKind method) const {
  for (const BenchmarkCell& c : cells) {
    if (c.n == n && c.method == method) return &c;
  }
  return nullptr;
}

std::vector<BenchmarkCell> aggregate(const std::vector<BenchmarkRow>& rows) {
  std::vector<BenchmarkCell> cells;
  for (const BenchmarkRow& row : rows) {
    auto it = std::find_if(cells.begin(), cells.end(), [&](const BenchmarkCell& c) {
      return c.n == row.n && c.method == row.run.method;
    });
    if (it == cells.end()) {
      cells.push_back({row.n, row.run.method, 0, 0.0, 0.0});
      it = cells.end() - 1;
    }
    it->runs += 1;
    it->mean_psnr += row.run.psnr;
    it->mean_ssim += row.run.ssim;
  }
  for (BenchmarkCell& c : cells) {
    c.mean_psnr /= c.runs;
    c.mean_ssim /= c.runs;
  }
  return cells;
}

int worker_count(int requested, std::size_t jobs) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("LOI_OPT_THREADS"); env && *env) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw Error(fmt::format("LOI_OPT_THREADS='{}' is not an integer", env));
      }
      if (n < 1) throw Error("LOI_OPT_THREADS must be >= 1");
    } else {
      n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    }
  }
  return static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

BenchmarkSummary run_benchmark_suite(const BenchmarkOptions& options, InvariantMonitor* monitor) {
  if (options.ns.empty() || options.seeds.empty() || options.methods.empty()) {
    throw Error("benchmark: ns, seeds and methods must be nonempty");
  }
  struct Job {
    ExperimentConfig config;
    LossKind method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int n : options.ns) {
    ExperimentConfig c = options.base;
    c.kind = ExperimentKind::disk_benchmark;
    c.n = n;
    c.methods = options.methods;
    c.seeds = options.seeds;
    c.validate();
    for (LossKind m : options.methods) {
      for (std::uint64_t s : options.seeds) jobs.push_back({c, m, s});
    }
  }

  std::vector<BenchmarkRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        std::optional<std::filesystem::path> dir;
        if (options.output_dir) {
          dir = *options.output_dir / fmt::format("n{}", job.config.n) /
                loi::to_string(job.method) / fmt::format("seed_{}", job.seed);
        }
        rows[i] = {job.config.n, run_cell(job.config, job.method, job.seed, dir, monitor).record};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int workers = worker_count(options.threads, jobs.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BenchmarkSummary summary;
  summary.rows = std::move(rows);
  summary.cells = aggregate(summary.rows);
  return summary;
}

void write_benchmark_csv(const std::filesystem::path& dir, const BenchmarkSummary& summary) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "runs.csv", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write '{}'", (dir / "runs.csv").string()));
    CsvWriter csv(out);
    csv.row({"n", "method", "seed", "psnr", "ssim", "param_mae", "max_param_error",
             "final_loss", "steps"});
    for (const BenchmarkRow& r : summary.rows) {
      csv.row({std::to_string(r.n), loi::to_string(r.run.method), std::to_string(r.run.seed),
               format_number(r.run.psnr), format_number(r.run.ssim),
               format_number(r.run.param_mae), format_number(r.run.max_param_error),
               format_number(r.run.final_loss), std::to_string(r.run.steps)});
    }
  }
  std::vector<int> ns;
  std::vector<LossKind> methods;
  for (const BenchmarkCell& c : summary.cells) {
    if (std::find(ns.begin(), ns.end(), c.n) == ns.end()) ns.push_back(c.n);
    if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) {
      methods.push_back(c.method);
    }
  }
  std::ofstream out(dir / "table.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", (dir / "table.csv").string()));
  CsvWriter csv(out);
  std::vector<std::string> header{"method"};
  for (int n : ns) {
    header.push_back(fmt::format("psnr_n{}", n));
    header.push_back(fmt::format("ssim_n{}", n));
  }
  csv.row(header);
  for (LossKind m : methods) {
    std::vector<std::string> row{loi::to_string(m)};
    for (int n : ns) {
      const BenchmarkCell* c = summary.find(n, m);
      row.push_back(c ? format_number(c->mean_psnr) : "");
      row.push_back(c ? format_number(c->mean_ssim) : "");
    }
    csv.row(row);
  }
}

}  // namespace loi::harness
