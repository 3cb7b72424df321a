#include "spmbd/birth_death.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spmbd/errors.hpp"

namespace spmbd {

CellSampler::CellSampler(const CellLayout& layout, std::span<const double> signed_density)
    : layout_(layout), density_(signed_density) {
  if (signed_density.size() != layout.size()) throw ConfigError("density does not match the cell layout");
  cumulative_.resize(signed_density.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < signed_density.size(); ++k) {
    acc += std::abs(signed_density[k]);
    cumulative_[k] = acc;
  }
  l1_mass_ = acc * layout.cell_volume();
}

std::size_t CellSampler::draw_cell(rng::Stream& stream) const {
  const double target = stream.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) {
    // target rounded up to the total: take the last cell with positive mass
    it = std::lower_bound(cumulative_.begin(), cumulative_.end(), cumulative_.back());
  }
  return static_cast<std::size_t>(it - cumulative_.begin());
}

void CellSampler::place(std::size_t cell, rng::Stream& stream, std::span<double> out) const {
  const auto idx = layout_.index(cell);
  const double h = layout_.h();
  for (std::size_t j = 0; j < idx.size(); ++j) out[j] = (static_cast<double>(idx[j]) + stream.uniform()) * h;
}

BirthBudget birth_budget(const FieldGrid& fgrid, std::size_t n0, double tau, rng::Stream& stream) {
  BirthBudget budget;
  double acc = 0.0;
  for (double f : fgrid.values()) acc += std::abs(f);
  budget.integral_abs_f = acc * fgrid.layout().cell_volume();
  budget.expected_births = static_cast<double>(n0) * tau * budget.integral_abs_f;
  if (!std::isfinite(budget.expected_births) || budget.expected_births > 9.0e15) {
    throw NumericalBlowupError("birth count overflow: expected " + std::to_string(budget.expected_births));
  }
  const double whole = std::floor(budget.expected_births);
  budget.realized_births = static_cast<std::uint64_t>(whole);
  if (stream.bernoulli(budget.expected_births - whole)) ++budget.realized_births;
  return budget;
}

void sample_births(const FieldGrid& fgrid, std::uint64_t count, const rng::StreamFamily& streams,
                   const Exec& exec, Ensemble& out) {
  if (count == 0) return;
  if (fgrid.size() == 0) throw ConfigError("cannot sample births from an empty field grid");
  const CellSampler sampler(fgrid.layout(), fgrid.values());
  if (!(sampler.l1_mass() > 0.0)) throw ConfigError("cannot sample births: the nonlinear term vanishes on every cell");
  const std::size_t dim = out.dim();
  const std::size_t first = out.grow(count);
  auto x = out.locations_mut();
  auto w = out.weights_mut();
  for_each_chunk(count, exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    rng::Stream stream = streams.stream(chunk);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t cell = sampler.draw_cell(stream);
      sampler.place(cell, stream, x.subspan((first + i) * dim, dim));
      w[first + i] = sampler.sign(cell);
    }
  });
}

namespace {

void resample_from_density(Ensemble& ensemble, const CellLayout& layout, std::span<const double> density,
                           const rng::StreamFamily& streams, const Exec& exec) {
  const CellSampler sampler(layout, density);
  const double z = sampler.l1_mass();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DegenerateSolutionError("piecewise-constant reconstruction has L1 mass " + std::to_string(z) +
                                  "; nothing to resample");
  }
  const std::size_t n0 = ensemble.n0();
  const std::size_t dim = ensemble.dim();
  ensemble.clear();
  ensemble.grow(n0);
  auto x = ensemble.locations_mut();
  auto w = ensemble.weights_mut();
  for_each_chunk(n0, exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    rng::Stream stream = streams.stream(chunk);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t cell = sampler.draw_cell(stream);
      sampler.place(cell, stream, x.subspan(i * dim, dim));
      w[i] = z * sampler.sign(cell);
    }
  });
}

std::vector<double> cell_averages(const SparseGrid& grid) {
  std::vector<double> u(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) u[k] = grid.average(k);
  return u;
}

}  // namespace

void annihilate_into(Ensemble& ensemble, const SparseGrid& grid, const rng::StreamFamily& streams, const Exec& exec) {
  if (ensemble.dim() != grid.dim()) throw ConfigError("annihilate: ensemble and grid dimensions differ");
  const auto u = cell_averages(grid);
  resample_from_density(ensemble, grid.layout(), u, streams, exec);
}

Ensemble annihilate(const SparseGrid& grid, std::size_t n0, const rng::StreamFamily& streams, const Exec& exec) {
  Ensemble out(grid.dim(), n0);
  annihilate_into(out, grid, streams, exec);
  return out;
}

void spm_full_resample_into(Ensemble& ensemble, const SparseGrid& grid, const FieldGrid& fgrid, double tau,
                            const rng::StreamFamily& streams, const Exec& exec) {
  if (grid.layout_ptr() != fgrid.layout_ptr()) throw ConfigError("field grid was not tabulated on this grid");
  if (ensemble.dim() != grid.dim()) throw ConfigError("resample: ensemble and grid dimensions differ");
  std::vector<double> g = cell_averages(grid);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += tau * fgrid.value(k);
  resample_from_density(ensemble, grid.layout(), g, streams, exec);
}

Ensemble spm_full_resample(const SparseGrid& grid, const FieldGrid& fgrid, std::size_t n0, double tau,
                           const rng::StreamFamily& streams, const Exec& exec) {
  Ensemble out(grid.dim(), n0);
  spm_full_resample_into(out, grid, fgrid, tau, streams, exec);
  return out;
}

}  // namespace spmbd
