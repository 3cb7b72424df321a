#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spmbd/parallel.hpp"
#include "spmbd/particles.hpp"
#include "spmbd/problems.hpp"
#include "spmbd/rng.hpp"
#include "spmbd/vug.hpp"

namespace spmbd {

enum class Method {
  kBirthDeath,   // births from the nonlinear increment, annihilation above n_a N(0)
  kBaselineSpm,  // full resample of N(0) particles from |U + tau f| every step
};

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct SolverConfig {
  double tau = 0.1;
  double h = 0.1;
  double T = 10.0;
  std::size_t n0 = 10000;
  double n_a = 3.0;
  std::uint64_t seed = 1;
  Method method = Method::kBirthDeath;
  /// Times at which the error evaluator runs; empty means every 10 steps plus T.
  std::vector<double> report_times;
  Exec exec;

  /// Throws ConfigError unless tau, h, T > 0, T / tau is an integer within
  /// 1e-9, n0 > 0 and n_a > 1.
  void validate() const;
  std::size_t steps() const;
};

/// Report times every `every` steps plus T.
std::vector<double> default_report_times(double tau, double T, std::size_t every = 10);

/// One row per time level t_m. count_before is N(t_m) as it entered the step;
/// particle_count is the population after the annihilation check, i.e. the
/// ensemble that receives the births. Masses describe the grid at t_m.
struct StepRow {
  double time = 0.0;
  std::size_t count_before = 0;
  std::size_t particle_count = 0;
  double signed_mass = 0.0;
  double l1_mass = 0.0;
  std::uint64_t births = 0;
  bool annihilated = false;
  double wall_ms = 0.0;
  double error = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  std::vector<StepRow> rows;
  std::vector<std::pair<double, double>> errors;  // (report time, error)
  std::optional<SparseGrid> final_grid;
  std::optional<Ensemble> final_ensemble;
  double total_wall_ms = 0.0;
  double initial_acceptance_rate = 0.0;
};

using ErrorEvaluator = std::function<double(const Ensemble&, const SparseGrid&, double t)>;

/// Rejection-samples n particles from |u0| / Z0 into `out` with weights
/// sign(u0) Z0. Doubles the envelope and restarts if a ratio ever exceeds it.
/// Returns the acceptance rate; throws ConfigError below a 1e-3 rate.
double sample_initial(const InitialData& initial, std::size_t n, Ensemble& out, std::uint64_t seed,
                      const Exec& exec = {});

/// Stochastic particle solver state. Construction performs the initial
/// sampling and builds the grids for t = 0.
class Solver {
 public:
  Solver(ProblemSpec problem, SolverConfig config);

  /// Advances one time step and returns the row describing t_m.
  StepRow step();
  /// Row for the current time without stepping (used for t = T).
  StepRow current_row() const;

  const Ensemble& ensemble() const { return ensemble_; }
  const SparseGrid& grid() const { return *grid_; }
  const FieldGrid& field() const { return *field_; }
  const ProblemSpec& problem() const { return problem_; }
  const SolverConfig& config() const { return config_; }
  std::size_t step_index() const { return step_; }
  double time() const { return ensemble_.time(); }
  double initial_acceptance_rate() const { return acceptance_rate_; }
  double init_wall_ms() const { return init_wall_ms_; }

  Ensemble release_ensemble() { return std::move(ensemble_); }

 private:
  void rebuild_grids();
  void step_birth_death(StepRow& row);
  void step_baseline(StepRow& row);

  ProblemSpec problem_;
  SolverConfig config_;
  Ensemble ensemble_;
  std::optional<SparseGrid> grid_;
  std::optional<FieldGrid> field_;
  std::size_t step_ = 0;
  double acceptance_rate_ = 0.0;
  double init_wall_ms_ = 0.0;
};

/// Runs T / tau steps, recording a row per time level (including t = T) and
/// the evaluator's error at every report time.
RunRecord run(const ProblemSpec& problem, const SolverConfig& config, const ErrorEvaluator& error = {});

/// `time,count_before,particle_count,signed_mass,l1_mass,births,annihilated,wall_ms,error`.
void write_run_csv(std::ostream& out, const RunRecord& record, bool include_wall_time = true);

}  // namespace spmbd
