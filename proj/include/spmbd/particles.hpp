#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spmbd/parallel.hpp"

namespace spmbd {

/// A weighted point: location in R^d and a finite, nonzero signed weight.
struct Particle {
  std::vector<double> location;
  double weight = 0.0;
};

/// Weighted point cloud X_t = (1/N(0)) sum_i w_i delta_{x_i}.
///
/// Locations are stored interleaved (particle-major, `dim` doubles each) next
/// to a parallel weight array. Indices are stable within one time step; the
/// normalization count `n0` never changes after construction.
class Ensemble {
 public:
  Ensemble(std::size_t dim, std::size_t n0, double time = 0.0);

  std::size_t dim() const { return dim_; }
  std::size_t n0() const { return n0_; }
  std::size_t count() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }
  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  /// Appends one particle; throws InvariantError on a non-finite location or a
  /// zero/non-finite weight.
  void push_back(std::span<const double> location, double weight);
  void push_back(const Particle& p) { push_back(p.location, p.weight); }

  Particle particle(std::size_t i) const;
  std::span<const double> location(std::size_t i) const { return {locations_.data() + i * dim_, dim_}; }
  double weight(std::size_t i) const { return weights_[i]; }

  std::span<const double> locations() const { return locations_; }
  std::span<const double> weights() const { return weights_; }

  /// Bulk access for samplers and movers. Writers must keep the invariants;
  /// check_invariants() validates after the fact.
  std::span<double> locations_mut() { return locations_; }
  std::span<double> weights_mut() { return weights_; }

  /// Grows the ensemble by n particles with unspecified contents and returns
  /// the index of the first new one.
  std::size_t grow(std::size_t n);

  /// Drops all particles but keeps the allocation for reuse.
  void clear();
  void reserve(std::size_t n);

  void check_invariants() const;

 private:
  std::size_t dim_;
  std::size_t n0_;
  double time_;
  std::vector<double> locations_;
  std::vector<double> weights_;
};

using TestFunction = std::function<double(std::span<const double>)>;

/// (1/N(0)) * sum_i w_i * testfn(x_i), reduced in a fixed pairwise order over
/// exec's chunks.
double weak_sum(const Ensemble& ensemble, const TestFunction& testfn, const Exec& exec = {});

/// weak_sum with testfn = 1.
double signed_mass(const Ensemble& ensemble, const Exec& exec = {});

}  // namespace spmbd
