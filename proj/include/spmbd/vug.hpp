#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "spmbd/operators.hpp"
#include "spmbd/parallel.hpp"
#include "spmbd/particles.hpp"

namespace spmbd {

/// Integer lattice coordinates of a side-h hypercube prod_j [idx_j h, (idx_j + 1) h).
using CellIndex = std::vector<std::int32_t>;

/// Set of occupied cells of the virtual uniform grid.
///
/// Open-addressing hash table from lattice index to a dense cell id; ids are
/// handed out in insertion order, which is what makes deposits deterministic.
/// Only occupied cells are ever stored.
class CellLayout {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  CellLayout(std::size_t dim, double h);

  std::size_t dim() const { return dim_; }
  double h() const { return h_; }
  double cell_volume() const { return volume_; }
  std::size_t size() const { return keys_.size() / dim_; }

  std::span<const std::int32_t> index(std::size_t cell) const { return {keys_.data() + cell * dim_, dim_}; }

  /// Cell id of idx, or npos when absent.
  std::size_t find(std::span<const std::int32_t> idx) const;
  /// Cell id of idx, inserting it when absent.
  std::size_t insert(std::span<const std::int32_t> idx);

  /// idx_j = floor(x_j / h). Throws NumericalBlowupError if outside int32 range.
  void locate(std::span<const double> x, std::span<std::int32_t> idx) const;
  /// ((idx_j + 1/2) h)_j.
  void center(std::size_t cell, std::span<double> out) const;

  void clear();

 private:
  std::size_t slot_of(std::span<const std::int32_t> idx) const;
  void rehash(std::size_t capacity);

  std::size_t dim_;
  double h_;
  double volume_;
  std::vector<std::int32_t> keys_;
  std::vector<std::uint32_t> slots_;  // 0 = empty, otherwise cell id + 1
  std::size_t mask_ = 0;
};

/// Piecewise-constant reconstruction: accumulated particle weight per occupied
/// cell. Frozen after construction; concurrent reads are safe.
class SparseGrid {
 public:
  SparseGrid(std::shared_ptr<const CellLayout> layout, std::vector<double> weights, std::size_t n0);

  const CellLayout& layout() const { return *layout_; }
  const std::shared_ptr<const CellLayout>& layout_ptr() const { return layout_; }
  std::size_t dim() const { return layout_->dim(); }
  double h() const { return layout_->h(); }
  std::size_t n0() const { return n0_; }
  std::size_t size() const { return weights_.size(); }

  double accumulated_weight(std::size_t cell) const { return weights_[cell]; }
  std::span<const double> accumulated_weights() const { return weights_; }
  /// Cell average of cell id: W_k / (n0 h^d).
  double average(std::size_t cell) const { return weights_[cell] * scale_; }

  /// U-bar at x; exactly 0 in unoccupied cells.
  double cell_average(std::span<const double> x) const;
  double cell_average_at(std::span<const std::int32_t> idx) const;

  /// Central differences (U(x + h e_j) - U(x - h e_j)) / 2h with absent neighbours read as 0.
  std::vector<double> gradient(std::span<const double> x) const;
  void gradient_at_index(std::span<const std::int32_t> idx, std::span<double> out) const;

  /// sum_k |U_k| h^d.
  double l1_mass() const;
  /// sum_k U_k h^d.
  double signed_mass() const;
  double total_weight() const;

 private:
  std::shared_ptr<const CellLayout> layout_;
  std::vector<double> weights_;
  std::size_t n0_;
  double scale_;
};

/// Tabulated f on the occupied cells of a SparseGrid (same cell ids).
class FieldGrid {
 public:
  FieldGrid(std::shared_ptr<const CellLayout> layout, std::vector<double> values);

  const CellLayout& layout() const { return *layout_; }
  const std::shared_ptr<const CellLayout>& layout_ptr() const { return layout_; }
  std::size_t size() const { return values_.size(); }
  double value(std::size_t cell) const { return values_[cell]; }
  std::span<const double> values() const { return values_; }
  /// f on x's cell; 0 off the occupied set.
  double value_at(std::span<const double> x) const;

 private:
  std::shared_ptr<const CellLayout> layout_;
  std::vector<double> values_;
};

/// Accumulates every particle weight into cell floor(x / h). Throws ConfigError
/// for h <= 0 or an empty ensemble.
SparseGrid deposit(const Ensemble& ensemble, double h, const Exec& exec = {});

/// f(t, center, U(center), grad U(center)) on each occupied cell. Non-finite
/// values raise NumericalBlowupError naming the cell.
FieldGrid tabulate_field(const SparseGrid& grid, const NonlinearTerm& f, double t);

/// Rows `idx_1,...,idx_d,accumulated_weight,cell_average`, sorted by index.
void write_grid_csv(std::ostream& out, const SparseGrid& grid);

}  // namespace spmbd
