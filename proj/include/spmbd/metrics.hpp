#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "spmbd/parallel.hpp"
#include "spmbd/particles.hpp"
#include "spmbd/vug.hpp"

namespace spmbd {

struct ProjectionBounds {
  double lo1 = -6.0;
  double hi1 = 8.0;
  double lo2 = -6.0;
  double hi2 = 8.0;
};

/// Dense (x1, x2) histogram of weights, normalized as a density:
/// value(mu, nu) = (1 / (n0 h^2)) sum_i w_i 1{x_i in Q^mu x Q^nu},
/// Q^mu = [lo1 + mu h, lo1 + (mu + 1) h).
struct ProjectionGrid {
  ProjectionBounds bounds;  // hi1/hi2 are snapped up to lo + n h
  double h = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  std::vector<double> values;  // row-major, mu * n2 + nu
  std::size_t dropped = 0;     // particles outside the bounds

  double value(std::size_t mu, std::size_t nu) const { return values[mu * n2 + nu]; }
  double center1(std::size_t mu) const { return bounds.lo1 + (static_cast<double>(mu) + 0.5) * h; }
  double center2(std::size_t nu) const { return bounds.lo2 + (static_cast<double>(nu) + 0.5) * h; }
};

/// Bins the first two coordinates of every particle. Out-of-bounds particles
/// are dropped and counted. Zero-area bounds raise ConfigError.
ProjectionGrid project_2d(const Ensemble& ensemble, double h, const ProjectionBounds& bounds, const Exec& exec = {});

/// ||U - u_ref|| / ||u_ref|| on the audit points x_k = k h inside [lo, hi);
/// U(x_k) is the value of lattice cell k. Throws UndefinedMetricError when
/// u_ref vanishes on every audit point.
double relative_l2_1d(const SparseGrid& grid, const std::function<double(double)>& ref, double lo, double hi);

/// Relative L2 error of a projection against ref evaluated at cell centres.
double relative_l2_projection(const ProjectionGrid& num, const std::function<double(double, double)>& ref);

/// Pearson correlation between the projection and ref at cell centres,
/// restricted to cells with |ref| > mask_fraction * max |ref|.
double projection_correlation(const ProjectionGrid& num, const std::function<double(double, double)>& ref,
                              double mask_fraction = 0.05);

enum class Refinement {
  kSampleSize,  // parameter grows as the error falls (N(0))
  kResolution,  // parameter shrinks as the error falls (tau, h)
};

/// Pairwise observed orders between consecutive (parameter, error) points.
std::vector<double> convergence_order(std::span<const std::pair<double, double>> points, Refinement refinement);

/// `l1,r1,l2,r2,h` header with its values, then `mu,nu,value` rows.
void write_projection_csv(std::ostream& out, const ProjectionGrid& grid);

}  // namespace spmbd
