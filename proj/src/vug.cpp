#include "spmbd/vug.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "spmbd/errors.hpp"

namespace spmbd {
namespace {

std::uint64_t hash_index(std::span<const std::int32_t> idx) {
  std::uint64_t h = 0x9E3779B97F4A7C15ull;
  for (std::int32_t v : idx) {
    h ^= static_cast<std::uint32_t>(v);
    h *= 0xFF51AFD7ED558CCDull;
    h ^= h >> 32;
  }
  h *= 0xC4CEB9FE1A85EC53ull;
  return h ^ (h >> 29);
}

std::string format_index(std::span<const std::int32_t> idx) {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < idx.size(); ++j) os << (j ? "," : "") << idx[j];
  os << ')';
  return os.str();
}

constexpr std::size_t kMaxDim = 16;

}  // namespace

CellLayout::CellLayout(std::size_t dim, double h) : dim_(dim), h_(h), volume_(std::pow(h, static_cast<double>(dim))) {
  if (dim == 0 || dim > kMaxDim) throw ConfigError("grid dimension must be in [1, 16]");
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("grid cell side h must be positive");
  rehash(16);
}

std::size_t CellLayout::slot_of(std::span<const std::int32_t> idx) const {
  std::size_t slot = hash_index(idx) & mask_;
  while (true) {
    const std::uint32_t entry = slots_[slot];
    if (entry == 0) return slot;
    if (std::equal(idx.begin(), idx.end(), keys_.begin() + (entry - 1) * dim_)) return slot;
    slot = (slot + 1) & mask_;
  }
}

std::size_t CellLayout::find(std::span<const std::int32_t> idx) const {
  const std::uint32_t entry = slots_[slot_of(idx)];
  return entry == 0 ? npos : entry - 1;
}

std::size_t CellLayout::insert(std::span<const std::int32_t> idx) {
  std::size_t slot = slot_of(idx);
  if (slots_[slot] != 0) return slots_[slot] - 1;
  const std::size_t id = size();
  if (2 * (id + 1) > slots_.size()) {
    rehash(2 * slots_.size());
    slot = slot_of(idx);
  }
  keys_.insert(keys_.end(), idx.begin(), idx.end());
  slots_[slot] = static_cast<std::uint32_t>(id + 1);
  return id;
}

void CellLayout::rehash(std::size_t capacity) {
  slots_.assign(capacity, 0);
  mask_ = capacity - 1;
  const std::size_t n = size();
  for (std::size_t id = 0; id < n; ++id) {
    std::size_t slot = hash_index(index(id)) & mask_;
    while (slots_[slot] != 0) slot = (slot + 1) & mask_;
    slots_[slot] = static_cast<std::uint32_t>(id + 1);
  }
}

void CellLayout::clear() {
  if (size() * 8 < slots_.size()) {
    for (std::size_t id = 0; id < size(); ++id) {
      std::size_t slot = hash_index(index(id)) & mask_;
      while (slots_[slot] != id + 1) slot = (slot + 1) & mask_;
      slots_[slot] = 0;
    }
  } else {
    std::fill(slots_.begin(), slots_.end(), 0u);
  }
  keys_.clear();
}

void CellLayout::locate(std::span<const double> x, std::span<std::int32_t> idx) const {
  for (std::size_t j = 0; j < dim_; ++j) {
    const double q = x[j] / h_;
    if (!(q >= -2147483648.0 && q < 2147483647.0)) {
      throw NumericalBlowupError("particle coordinate " + std::to_string(x[j]) + " outside the addressable lattice");
    }
    // floor without a libm call: truncate, then step down for negative fractions
    auto c = static_cast<std::int32_t>(q);
    if (static_cast<double>(c) > q) --c;
    idx[j] = c;
  }
}

void CellLayout::center(std::size_t cell, std::span<double> out) const {
  const auto idx = index(cell);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = (static_cast<double>(idx[j]) + 0.5) * h_;
}

SparseGrid::SparseGrid(std::shared_ptr<const CellLayout> layout, std::vector<double> weights, std::size_t n0)
    : layout_(std::move(layout)), weights_(std::move(weights)), n0_(n0) {
  if (weights_.size() != layout_->size()) throw ConfigError("grid weights do not match the cell layout");
  if (n0_ == 0) throw ConfigError("grid n0 must be positive");
  scale_ = 1.0 / (static_cast<double>(n0_) * layout_->cell_volume());
}

double SparseGrid::cell_average(std::span<const double> x) const {
  std::int32_t idx[kMaxDim];
  layout_->locate(x, {idx, dim()});
  return cell_average_at({idx, dim()});
}

double SparseGrid::cell_average_at(std::span<const std::int32_t> idx) const {
  const std::size_t cell = layout_->find(idx);
  return cell == CellLayout::npos ? 0.0 : average(cell);
}

std::vector<double> SparseGrid::gradient(std::span<const double> x) const {
  std::int32_t idx[kMaxDim];
  layout_->locate(x, {idx, dim()});
  std::vector<double> g(dim());
  gradient_at_index({idx, dim()}, g);
  return g;
}

void SparseGrid::gradient_at_index(std::span<const std::int32_t> idx, std::span<double> out) const {
  std::int32_t probe[kMaxDim];
  std::copy(idx.begin(), idx.end(), probe);
  const std::span<const std::int32_t> view{probe, dim()};
  for (std::size_t j = 0; j < dim(); ++j) {
    probe[j] = idx[j] + 1;
    const double forward = cell_average_at(view);
    probe[j] = idx[j] - 1;
    const double backward = cell_average_at(view);
    probe[j] = idx[j];
    out[j] = (forward - backward) / (2.0 * h());
  }
}

double SparseGrid::total_weight() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

// Same summation order as CellSampler, so resampled weights equal l1_mass() exactly.
double SparseGrid::signed_mass() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < size(); ++k) acc += average(k);
  return acc * layout_->cell_volume();
}

double SparseGrid::l1_mass() const {
  double acc = 0.0;
  for (std::size_t k = 0; k < size(); ++k) acc += std::abs(average(k));
  return acc * layout_->cell_volume();
}

FieldGrid::FieldGrid(std::shared_ptr<const CellLayout> layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (values_.size() != layout_->size()) throw ConfigError("field values do not match the cell layout");
}

double FieldGrid::value_at(std::span<const double> x) const {
  std::int32_t idx[kMaxDim];
  layout_->locate(x, {idx, layout_->dim()});
  const std::size_t cell = layout_->find({idx, layout_->dim()});
  return cell == CellLayout::npos ? 0.0 : values_[cell];
}

SparseGrid deposit(const Ensemble& ensemble, double h, const Exec& exec) {
  if (!(h > 0.0)) throw ConfigError("deposit requires h > 0");
  if (ensemble.empty()) throw ConfigError("deposit requires a nonempty ensemble");
  const std::size_t dim = ensemble.dim();
  auto layout = std::make_shared<CellLayout>(dim, h);
  std::vector<double> weights;

  // Per-chunk partial maps, merged in chunk order so the result depends on the
  // chunk size only.
  struct Partial {
    CellLayout cells;
    std::vector<double> sums;
    std::vector<std::int32_t> idx;
    std::vector<double> dense;
    std::vector<unsigned char> occupied;
  };
  const std::size_t n = ensemble.count();
  const std::size_t chunks = exec.chunks(n);
  const std::size_t batch = std::max<std::size_t>(1, exec.threads);
  std::vector<Partial> partials;
  partials.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) partials.push_back({CellLayout(dim, h), {}, {}, {}, {}});

  const auto locs = ensemble.locations();
  const auto ws = ensemble.weights();
  for (std::size_t first = 0; first < chunks; first += batch) {
    const std::size_t in_batch = std::min(batch, chunks - first);
    parallel_for(in_batch, exec.threads, [&](std::size_t b) {
      Partial& p = partials[b];
      p.cells.clear();
      p.sums.clear();
      const std::size_t begin = (first + b) * exec.chunk_size;
      const std::size_t end = std::min(n, begin + exec.chunk_size);
      const std::size_t len = end - begin;
      p.idx.resize(len * dim);
      std::array<std::int32_t, kMaxDim> lo, hi;
      lo.fill(std::numeric_limits<std::int32_t>::max());
      hi.fill(std::numeric_limits<std::int32_t>::min());
      for (std::size_t i = 0; i < len; ++i) {
        const std::span<std::int32_t> view{p.idx.data() + i * dim, dim};
        p.cells.locate(locs.subspan((begin + i) * dim, dim), view);
        for (std::size_t j = 0; j < dim; ++j) {
          lo[j] = std::min(lo[j], view[j]);
          hi[j] = std::max(hi[j], view[j]);
        }
      }
      // Dense accumulation over the chunk's bounding box when it is small;
      // cells are then emitted in lexicographic order.
      double volume = 1.0;
      for (std::size_t j = 0; j < dim; ++j) volume *= static_cast<double>(hi[j]) - lo[j] + 1.0;
      if (volume <= 2.0 * static_cast<double>(len) + 1024.0) {
        const auto cells = static_cast<std::size_t>(volume);
        p.dense.assign(cells, 0.0);
        p.occupied.assign(cells, 0);
        for (std::size_t i = 0; i < len; ++i) {
          std::size_t linear = 0;
          for (std::size_t j = 0; j < dim; ++j) {
            linear = linear * static_cast<std::size_t>(hi[j] - lo[j] + 1) +
                     static_cast<std::size_t>(p.idx[i * dim + j] - lo[j]);
          }
          p.dense[linear] += ws[begin + i];
          p.occupied[linear] = 1;
        }
        std::array<std::int32_t, kMaxDim> cell;
        for (std::size_t linear = 0; linear < cells; ++linear) {
          if (!p.occupied[linear]) continue;
          std::size_t rest = linear;
          for (std::size_t j = dim; j-- > 0;) {
            const auto extent = static_cast<std::size_t>(hi[j] - lo[j] + 1);
            cell[j] = lo[j] + static_cast<std::int32_t>(rest % extent);
            rest /= extent;
          }
          p.cells.insert({cell.data(), dim});
          p.sums.push_back(p.dense[linear]);
        }
        return;
      }
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t id = p.cells.insert({p.idx.data() + i * dim, dim});
        if (id == p.sums.size()) p.sums.push_back(0.0);
        p.sums[id] += ws[begin + i];
      }
    });
    for (std::size_t b = 0; b < in_batch; ++b) {
      const Partial& p = partials[b];
      for (std::size_t k = 0; k < p.sums.size(); ++k) {
        const std::size_t id = layout->insert(p.cells.index(k));
        if (id == weights.size()) weights.push_back(0.0);
        weights[id] += p.sums[k];
      }
    }
  }
  return SparseGrid(std::move(layout), std::move(weights), ensemble.n0());
}

FieldGrid tabulate_field(const SparseGrid& grid, const NonlinearTerm& f, double t) {
  const std::size_t dim = grid.dim();
  const CellLayout& layout = grid.layout();
  std::vector<double> values(grid.size());
  std::vector<double> center(dim);
  std::vector<double> grad(dim, 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    layout.center(k, center);
    if (f.uses_gradient) grid.gradient_at_index(layout.index(k), grad);
    const double v = f.eval(t, center, grid.average(k), grad);
    if (!std::isfinite(v)) {
      throw NumericalBlowupError("non-finite nonlinear term in cell " + format_index(layout.index(k)) +
                                 " at t=" + std::to_string(t));
    }
    values[k] = v;
  }
  return FieldGrid(grid.layout_ptr(), std::move(values));
}

void write_grid_csv(std::ostream& out, const SparseGrid& grid) {
  const std::size_t dim = grid.dim();
  const CellLayout& layout = grid.layout();
  for (std::size_t j = 0; j < dim; ++j) out << "idx_" << (j + 1) << ',';
  out << "accumulated_weight,cell_average\n";
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = layout.index(a);
    const auto ib = layout.index(b);
    return std::lexicographical_compare(ia.begin(), ia.end(), ib.begin(), ib.end());
  });
  const auto old_precision = out.precision(17);
  for (std::size_t k : order) {
    for (std::int32_t v : layout.index(k)) out << v << ',';
    out << grid.accumulated_weight(k) << ',' << grid.average(k) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace spmbd
