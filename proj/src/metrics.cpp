#include "spmbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "spmbd/errors.hpp"

namespace spmbd {
namespace {

std::size_t cell_count(double lo, double hi, double h) {
  const double span = (hi - lo) / h;
  return static_cast<std::size_t>(std::ceil(span - 1e-9));
}

}  // namespace

ProjectionGrid project_2d(const Ensemble& ensemble, double h, const ProjectionBounds& bounds, const Exec& exec) {
  if (ensemble.dim() < 2) throw ConfigError("projection needs at least two dimensions");
  if (!(h > 0.0)) throw ConfigError("projection cell side must be positive");
  if (!(bounds.hi1 > bounds.lo1) || !(bounds.hi2 > bounds.lo2)) throw ConfigError("projection bounds have zero area");
  ProjectionGrid grid;
  grid.h = h;
  grid.n1 = cell_count(bounds.lo1, bounds.hi1, h);
  grid.n2 = cell_count(bounds.lo2, bounds.hi2, h);
  grid.bounds = {bounds.lo1, bounds.lo1 + static_cast<double>(grid.n1) * h, bounds.lo2,
                 bounds.lo2 + static_cast<double>(grid.n2) * h};
  grid.values.assign(grid.n1 * grid.n2, 0.0);

  const std::size_t chunks = exec.chunks(ensemble.count());
  std::vector<std::vector<double>> partial(chunks);
  std::vector<std::size_t> dropped(chunks, 0);
  const std::size_t dim = ensemble.dim();
  const auto x = ensemble.locations();
  const auto w = ensemble.weights();
  for_each_chunk(ensemble.count(), exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& acc = partial[chunk];
    acc.assign(grid.values.size(), 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const double a = std::floor((x[i * dim] - grid.bounds.lo1) / h);
      const double b = std::floor((x[i * dim + 1] - grid.bounds.lo2) / h);
      if (a < 0.0 || b < 0.0 || a >= static_cast<double>(grid.n1) || b >= static_cast<double>(grid.n2)) {
        ++dropped[chunk];
        continue;
      }
      acc[static_cast<std::size_t>(a) * grid.n2 + static_cast<std::size_t>(b)] += w[i];
    }
  });
  const double scale = 1.0 / (static_cast<double>(ensemble.n0()) * h * h);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < grid.values.size(); ++k) grid.values[k] += partial[c][k];
    grid.dropped += dropped[c];
  }
  for (double& v : grid.values) v *= scale;
  return grid;
}

double relative_l2_1d(const SparseGrid& grid, const std::function<double(double)>& ref, double lo, double hi) {
  if (grid.dim() != 1) throw ConfigError("relative_l2_1d needs a one-dimensional grid");
  if (!(hi > lo)) throw ConfigError("audit window is empty");
  const double h = grid.h();
  const auto first = static_cast<std::int64_t>(std::ceil(lo / h - 1e-9));
  const auto last = static_cast<std::int64_t>(std::ceil(hi / h - 1e-9));  // exclusive
  double diff = 0.0;
  double norm = 0.0;
  for (std::int64_t k = first; k < last; ++k) {
    const std::int32_t idx = static_cast<std::int32_t>(k);
    const double num = grid.cell_average_at({&idx, 1});
    const double r = ref(static_cast<double>(k) * h);
    diff += (num - r) * (num - r);
    norm += r * r;
  }
  if (norm == 0.0) throw UndefinedMetricError("reference vanishes on the audit window");
  return std::sqrt(diff / norm);
}

double relative_l2_projection(const ProjectionGrid& num, const std::function<double(double, double)>& ref) {
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t mu = 0; mu < num.n1; ++mu) {
    for (std::size_t nu = 0; nu < num.n2; ++nu) {
      const double r = ref(num.center1(mu), num.center2(nu));
      const double d = num.value(mu, nu) - r;
      diff += d * d;
      norm += r * r;
    }
  }
  if (norm == 0.0) throw UndefinedMetricError("reference projection vanishes on the grid");
  return std::sqrt(diff / norm);
}

double projection_correlation(const ProjectionGrid& num, const std::function<double(double, double)>& ref,
                              double mask_fraction) {
  std::vector<double> r(num.values.size());
  double peak = 0.0;
  for (std::size_t mu = 0; mu < num.n1; ++mu) {
    for (std::size_t nu = 0; nu < num.n2; ++nu) {
      r[mu * num.n2 + nu] = ref(num.center1(mu), num.center2(nu));
      peak = std::max(peak, std::abs(r[mu * num.n2 + nu]));
    }
  }
  double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (std::abs(r[k]) <= mask_fraction * peak) continue;
    const double a = num.values[k];
    const double b = r[k];
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
    ++n;
  }
  if (n < 2) throw UndefinedMetricError("too few cells for a correlation");
  const double dn = static_cast<double>(n);
  const double cov = sab - sa * sb / dn;
  const double va = saa - sa * sa / dn;
  const double vb = sbb - sb * sb / dn;
  if (!(va > 0.0) || !(vb > 0.0)) throw UndefinedMetricError("constant field has no correlation");
  return cov / std::sqrt(va * vb);
}

std::vector<double> convergence_order(std::span<const std::pair<double, double>> points, Refinement refinement) {
  if (points.size() < 2) throw ConfigError("convergence order needs at least two points");
  for (const auto& [p, e] : points) {
    if (!(p > 0.0)) throw ConfigError("convergence parameters must be positive");
    if (!(e > 0.0)) throw ConfigError("convergence errors must be positive");
  }
  std::vector<double> orders;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto [p0, e0] = points[i];
    const auto [p1, e1] = points[i + 1];
    if (p0 == p1) throw ConfigError("convergence parameters must be strictly monotone");
    const double ratio = refinement == Refinement::kSampleSize ? p1 / p0 : p0 / p1;
    orders.push_back(std::log(e0 / e1) / std::log(ratio));
  }
  return orders;
}

void write_projection_csv(std::ostream& out, const ProjectionGrid& grid) {
  const auto old_precision = out.precision(17);
  out << "l1,r1,l2,r2,h\n"
      << grid.bounds.lo1 << ',' << grid.bounds.hi1 << ',' << grid.bounds.lo2 << ',' << grid.bounds.hi2 << ','
      << grid.h << "\nmu,nu,value\n";
  for (std::size_t mu = 0; mu < grid.n1; ++mu) {
    for (std::size_t nu = 0; nu < grid.n2; ++nu) out << mu << ',' << nu << ',' << grid.value(mu, nu) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace spmbd
