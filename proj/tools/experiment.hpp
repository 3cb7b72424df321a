#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "spmbd/metrics.hpp"
#include "spmbd/problems.hpp"
#include "spmbd/reference.hpp"
#include "spmbd/solver.hpp"

namespace spmbd::tools {

/// Benchmark references keyed by snapshot times, computed once per process.
class ReferenceCache {
 public:
  std::shared_ptr<const reference::ReferenceSolution> benchmark(std::vector<double> times);

 private:
  std::mutex mutex_;
  std::map<std::vector<double>, std::shared_ptr<const reference::ReferenceSolution>> entries_;
};

/// Error of the state at time t. The benchmark uses relative_l2_1d over the
/// audit window; allen-cahn compares the (x1, x2) projection with cell side
/// config.h against m_ref. Report times default as in run().
ErrorEvaluator error_evaluator(const ProblemSpec& problem, const SolverConfig& config, ReferenceCache& cache);

struct SweepResult {
  double error = 0.0;  // at T
  double wall_ms = 0.0;
  RunRecord record;
};

/// Runs each config to T on up to `workers` threads and evaluates the error
/// at T only. Results keep the order of `configs`.
std::vector<SweepResult> run_sweep(const ProblemSpec& problem, std::span<const SolverConfig> configs,
                                   unsigned workers, ReferenceCache& cache, bool keep_records = false);

/// Default thread count: $SPMBD_THREADS if set and positive, else the
/// hardware concurrency.
unsigned default_threads();

/// Writes through a temporary file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace spmbd::tools
