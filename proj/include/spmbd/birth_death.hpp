#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spmbd/parallel.hpp"
#include "spmbd/particles.hpp"
#include "spmbd/rng.hpp"
#include "spmbd/vug.hpp"

namespace spmbd {

/// Number of particles to inject for one step.
struct BirthBudget {
  double integral_abs_f = 0.0;    // sum over occupied cells of |f| h^d
  double expected_births = 0.0;   // N(0) tau integral_abs_f
  std::uint64_t realized_births = 0;
};

/// Categorical distribution over cells proportional to |density_k|, with
/// within-cell uniform placement. The cumulative table is built once; draws
/// are lock-free and can run from any number of streams.
class CellSampler {
 public:
  CellSampler(const CellLayout& layout, std::span<const double> signed_density);

  /// sum_k |density_k| h^d.
  double l1_mass() const { return l1_mass_; }
  std::size_t draw_cell(rng::Stream& stream) const;
  /// Uniform location inside cell.
  void place(std::size_t cell, rng::Stream& stream, std::span<double> out) const;
  double sign(std::size_t cell) const { return density_[cell] < 0.0 ? -1.0 : 1.0; }

 private:
  const CellLayout& layout_;
  std::span<const double> density_;
  std::vector<double> cumulative_;
  double l1_mass_ = 0.0;
};

/// integral |f| over occupied cells and the stochastically rounded birth count
/// floor(E) + Bernoulli(E - floor(E)).
BirthBudget birth_budget(const FieldGrid& fgrid, std::size_t n0, double tau, rng::Stream& stream);

/// Appends `count` particles drawn from |f| / integral |f|, each with weight
/// sign(f) at its cell. Throws ConfigError when count > 0 and f vanishes on
/// every cell.
void sample_births(const FieldGrid& fgrid, std::uint64_t count, const rng::StreamFamily& streams,
                   const Exec& exec, Ensemble& out);

/// Replaces the contents of `ensemble` (releasing the old particles first)
/// with exactly n0 particles drawn from |U| / Z, weights Z sign(U), where
/// Z = sum_k |U_k| h^d. Throws DegenerateSolutionError if Z = 0.
void annihilate_into(Ensemble& ensemble, const SparseGrid& grid, const rng::StreamFamily& streams,
                     const Exec& exec = {});
Ensemble annihilate(const SparseGrid& grid, std::size_t n0, const rng::StreamFamily& streams, const Exec& exec = {});

/// Baseline SPM step: n0 particles from |U + tau f| with weights Z' sign(U + tau f).
void spm_full_resample_into(Ensemble& ensemble, const SparseGrid& grid, const FieldGrid& fgrid, double tau,
                            const rng::StreamFamily& streams, const Exec& exec = {});
Ensemble spm_full_resample(const SparseGrid& grid, const FieldGrid& fgrid, std::size_t n0, double tau,
                           const rng::StreamFamily& streams, const Exec& exec = {});

}  // namespace spmbd
