#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "spmbd/errors.hpp"

namespace spmbd::tools {

std::shared_ptr<const reference::ReferenceSolution> ReferenceCache::benchmark(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::lock_guard lock(mutex_);
  auto& slot = entries_[times];
  if (!slot) slot = std::make_shared<const reference::ReferenceSolution>(reference::ReferenceSolution::benchmark(times));
  return slot;
}

ErrorEvaluator error_evaluator(const ProblemSpec& problem, const SolverConfig& config, ReferenceCache& cache) {
  if (problem.name == "benchmark1d") {
    const std::vector<double> times =
        config.report_times.empty() ? default_report_times(config.tau, config.T) : config.report_times;
    auto ref = cache.benchmark(times);
    return [ref](const Ensemble&, const SparseGrid& grid, double t) {
      return relative_l2_1d(grid, [&](double x) { return (*ref)(x, t); }, benchmark::kAuditLo, benchmark::kAuditHi);
    };
  }
  if (problem.reference && problem.dim >= 2) {
    const auto projection = problem.reference->projection;
    const double h = config.h;
    const Exec exec = config.exec;
    return [projection, h, exec](const Ensemble& e, const SparseGrid&, double t) {
      const ProjectionGrid grid = project_2d(e, h, ProjectionBounds{}, exec);
      return relative_l2_projection(grid, [&](double a, double b) { return projection(a, b, t); });
    };
  }
  throw ConfigError("no error reference for problem '" + problem.name + "'");
}

std::vector<SweepResult> run_sweep(const ProblemSpec& problem, std::span<const SolverConfig> configs,
                                   unsigned workers, ReferenceCache& cache, bool keep_records) {
  std::vector<SweepResult> results(configs.size());
  const unsigned pool = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(configs.size())));
  const unsigned inner = std::max(1u, workers / pool);
  parallel_for(configs.size(), pool, [&](std::size_t i) {
    SolverConfig c = configs[i];
    c.report_times = {c.T};
    c.exec.threads = inner;
    RunRecord record = run(problem, c, error_evaluator(problem, c, cache));
    results[i].error = record.errors.back().second;
    results[i].wall_ms = record.total_wall_ms;
    if (keep_records) {
      results[i].record = std::move(record);
    }
  });
  return results;
}

unsigned default_threads() {
  if (const char* env = std::getenv("SPMBD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace spmbd::tools
