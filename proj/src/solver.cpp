#include "spmbd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "spmbd/birth_death.hpp"
#include "spmbd/dynamics.hpp"
#include "spmbd/errors.hpp"

namespace spmbd {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

constexpr double kMinAcceptance = 1e-3;
constexpr int kMaxEnvelopeDoublings = 20;

}  // namespace

std::string to_string(Method method) {
  return method == Method::kBirthDeath ? "birth_death" : "baseline_spm";
}

Method parse_method(const std::string& name) {
  if (name == "birth_death" || name == "birth-death" || name == "bd") return Method::kBirthDeath;
  if (name == "baseline_spm" || name == "spm" || name == "baseline-spm") return Method::kBaselineSpm;
  throw ConfigError("unknown method '" + name + "' (expected birth_death or baseline_spm)");
}

void SolverConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(h > 0.0)) throw ConfigError("h must be positive");
  if (!(T > 0.0)) throw ConfigError("T must be positive");
  if (n0 == 0) throw ConfigError("n0 must be positive");
  if (!(n_a > 1.0)) throw ConfigError("n_a must exceed 1");
  if (exec.chunk_size == 0) throw ConfigError("chunk size must be positive");
  const double ratio = T / tau;
  if (std::round(ratio) < 1.0 || std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("T / tau must be a positive integer");
  }
}

std::size_t SolverConfig::steps() const {
  validate();
  return static_cast<std::size_t>(std::round(T / tau));
}

std::vector<double> default_report_times(double tau, double T, std::size_t every) {
  const auto steps = static_cast<std::size_t>(std::round(T / tau));
  std::vector<double> times;
  for (std::size_t m = every; m < steps; m += every) times.push_back(static_cast<double>(m) * tau);
  times.push_back(T);
  return times;
}

double sample_initial(const InitialData& initial, std::size_t n, Ensemble& out, std::uint64_t seed,
                      const Exec& exec) {
  if (!(initial.l1_norm > 0.0) || !std::isfinite(initial.l1_norm)) {
    throw ConfigError("initial data must have finite positive L1 norm");
  }
  const ProposalSampler& proposal = initial.sampler;
  const std::size_t dim = out.dim();
  const std::size_t first = out.count();
  const auto max_proposals = [](std::size_t count) {
    return static_cast<std::size_t>(static_cast<double>(count) / kMinAcceptance) + 1000;
  };
  double envelope = proposal.envelope;
  for (int attempt = 0; attempt <= kMaxEnvelopeDoublings; ++attempt) {
    out.grow(n);
    auto x = out.locations_mut();
    auto w = out.weights_mut();
    const std::size_t chunks = exec.chunks(n);
    std::vector<std::size_t> proposals(chunks, 0);
    std::vector<char> overflow(chunks, 0);
    std::vector<char> starved(chunks, 0);
    const rng::StreamFamily streams(seed, rng::stream_id(rng::Purpose::kInitialSampling, attempt));
    for_each_chunk(n, exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      rng::Stream stream = streams.stream(chunk);
      const std::size_t budget = max_proposals(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto loc = x.subspan((first + i) * dim, dim);
        while (true) {
          if (++proposals[chunk] > budget) {
            starved[chunk] = 1;
            return;
          }
          proposal.draw(stream, loc);
          const double u0 = initial.value(loc);
          const double ratio = std::abs(u0) / (envelope * proposal.density(loc));
          if (ratio > 1.0) {
            overflow[chunk] = 1;
            return;
          }
          if (u0 != 0.0 && stream.uniform() < ratio) {
            w[first + i] = u0 > 0.0 ? initial.l1_norm : -initial.l1_norm;
            break;
          }
        }
      }
    });
    if (std::any_of(starved.begin(), starved.end(), [](char c) { return c != 0; })) {
      throw ConfigError("initial rejection sampler acceptance rate fell below 1e-3");
    }
    if (std::any_of(overflow.begin(), overflow.end(), [](char c) { return c != 0; })) {
      // Envelope too small: discard and retry with a doubled constant.
      const std::size_t keep = first;
      Ensemble trimmed(out.dim(), out.n0(), out.time());
      for (std::size_t i = 0; i < keep; ++i) trimmed.push_back(out.location(i), out.weight(i));
      out = std::move(trimmed);
      envelope *= 2.0;
      continue;
    }
    std::size_t total = 0;
    for (std::size_t p : proposals) total += p;
    return static_cast<double>(n) / static_cast<double>(total);
  }
  throw ConfigError("initial rejection sampler envelope could not be bounded");
}

Solver::Solver(ProblemSpec problem, SolverConfig config)
    : problem_(std::move(problem)), config_(std::move(config)), ensemble_(problem_.dim, std::max<std::size_t>(config_.n0, 1)) {
  config_.validate();
  if (problem_.op.advection.size() != problem_.dim) throw ConfigError("advection vector has wrong dimension");
  const auto start = Clock::now();
  ensemble_.reserve(config_.n0);
  acceptance_rate_ = sample_initial(problem_.initial, config_.n0, ensemble_, config_.seed, config_.exec);
  rebuild_grids();
  init_wall_ms_ = elapsed_ms(start);
}

void Solver::rebuild_grids() {
  grid_.reset();
  field_.reset();
  grid_.emplace(deposit(ensemble_, config_.h, config_.exec));
  const double l1 = grid_->l1_mass();
  if (!std::isfinite(l1)) throw NumericalBlowupError("non-finite cell average at t=" + std::to_string(time()));
  field_.emplace(tabulate_field(*grid_, problem_.nonlinear, time()));
}

StepRow Solver::current_row() const {
  StepRow row;
  row.time = time();
  row.count_before = ensemble_.count();
  row.particle_count = ensemble_.count();
  row.signed_mass = grid_->signed_mass();
  row.l1_mass = grid_->l1_mass();
  return row;
}

void Solver::step_birth_death(StepRow& row) {
  const std::uint64_t m = step_;
  if (static_cast<double>(ensemble_.count()) > config_.n_a * static_cast<double>(config_.n0)) {
    annihilate_into(ensemble_, *grid_, {config_.seed, rng::stream_id(rng::Purpose::kAnnihilation, m)}, config_.exec);
    row.annihilated = true;
  }
  row.particle_count = ensemble_.count();
  rng::Stream count_stream(config_.seed, rng::stream_id(rng::Purpose::kBirthCount, m), 0);
  const BirthBudget budget = birth_budget(*field_, config_.n0, config_.tau, count_stream);
  ensemble_.reserve(ensemble_.count() + budget.realized_births);
  sample_births(*field_, budget.realized_births, {config_.seed, rng::stream_id(rng::Purpose::kBirths, m)},
                config_.exec, ensemble_);
  row.births = budget.realized_births;
}

void Solver::step_baseline(StepRow& row) {
  const std::uint64_t m = step_;
  spm_full_resample_into(ensemble_, *grid_, *field_, config_.tau,
                         {config_.seed, rng::stream_id(rng::Purpose::kResample, m)}, config_.exec);
  row.particle_count = ensemble_.count();
}

StepRow Solver::step() {
  const auto start = Clock::now();
  StepRow row = current_row();
  try {
    if (config_.method == Method::kBirthDeath) {
      step_birth_death(row);
    } else {
      step_baseline(row);
    }
    apply_semigroup(ensemble_, problem_.op, config_.tau,
                    {config_.seed, rng::stream_id(rng::Purpose::kDiffusion, step_)}, config_.exec);
    ++step_;
    ensemble_.set_time(static_cast<double>(step_) * config_.tau);
    rebuild_grids();
  } catch (const NumericalBlowupError& e) {
    throw NumericalBlowupError("step " + std::to_string(step_) + ": " + e.what());
  } catch (const DegenerateSolutionError& e) {
    throw DegenerateSolutionError("step " + std::to_string(step_) + ": " + e.what());
  }
  row.wall_ms = elapsed_ms(start);
  return row;
}

RunRecord run(const ProblemSpec& problem, const SolverConfig& config, const ErrorEvaluator& error) {
  const std::size_t steps = config.steps();
  std::vector<double> report = config.report_times.empty() ? default_report_times(config.tau, config.T)
                                                           : config.report_times;
  std::vector<char> report_step(steps + 1, 0);
  for (double t : report) {
    const double m = std::round(t / config.tau);
    if (m < 0.0 || m > static_cast<double>(steps) || std::abs(t / config.tau - m) > 1e-9 * std::max(1.0, m)) {
      throw ConfigError("report time " + std::to_string(t) + " is not a time level of this run");
    }
    report_step[static_cast<std::size_t>(m)] = 1;
  }

  RunRecord record;
  Solver solver(problem, config);
  record.initial_acceptance_rate = solver.initial_acceptance_rate();
  auto evaluate = [&](StepRow& row, std::size_t m) {
    if (!error || !report_step[m]) return;
    row.error = error(solver.ensemble(), solver.grid(), solver.time());
    record.errors.emplace_back(row.time, row.error);
  };
  for (std::size_t m = 0; m < steps; ++m) {
    // The error at t_m is evaluated on the state before the step consumes it.
    double err = std::numeric_limits<double>::quiet_NaN();
    if (error && report_step[m]) {
      err = error(solver.ensemble(), solver.grid(), solver.time());
      record.errors.emplace_back(solver.time(), err);
    }
    StepRow row = solver.step();
    row.error = err;
    if (m == 0) row.wall_ms += solver.init_wall_ms();
    record.total_wall_ms += row.wall_ms;
    record.rows.push_back(row);
  }
  StepRow last = solver.current_row();
  evaluate(last, steps);
  record.rows.push_back(last);
  record.final_grid.emplace(solver.grid());
  record.final_ensemble.emplace(solver.release_ensemble());
  return record;
}

void write_run_csv(std::ostream& out, const RunRecord& record, bool include_wall_time) {
  const auto old_precision = out.precision(17);
  out << "time,count_before,particle_count,signed_mass,l1_mass,births,annihilated"
      << (include_wall_time ? ",wall_ms" : "") << ",error\n";
  for (const StepRow& r : record.rows) {
    out << r.time << ',' << r.count_before << ',' << r.particle_count << ',' << r.signed_mass << ',' << r.l1_mass
        << ',' << r.births << ',' << (r.annihilated ? 1 : 0);
    if (include_wall_time) out << ',' << r.wall_ms;
    out << ',';
    if (!std::isnan(r.error)) out << r.error;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace spmbd
