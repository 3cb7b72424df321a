#include "spmbd/particles.hpp"

#include <cmath>
#include <string>

#include "spmbd/errors.hpp"

namespace spmbd {

Ensemble::Ensemble(std::size_t dim, std::size_t n0, double time) : dim_(dim), n0_(n0), time_(time) {
  if (dim == 0) throw ConfigError("ensemble dimension must be positive");
  if (n0 == 0) throw ConfigError("ensemble n0 must be positive");
}

void Ensemble::push_back(std::span<const double> location, double weight) {
  if (location.size() != dim_) {
    throw InvariantError("particle of dimension " + std::to_string(location.size()) +
                         " pushed into ensemble of dimension " + std::to_string(dim_));
  }
  for (double c : location) {
    if (!std::isfinite(c)) throw InvariantError("particle location is not finite");
  }
  if (!std::isfinite(weight) || weight == 0.0) throw InvariantError("particle weight must be finite and nonzero");
  locations_.insert(locations_.end(), location.begin(), location.end());
  weights_.push_back(weight);
}

Particle Ensemble::particle(std::size_t i) const {
  const auto loc = location(i);
  return {{loc.begin(), loc.end()}, weights_[i]};
}

std::size_t Ensemble::grow(std::size_t n) {
  const std::size_t first = count();
  locations_.resize(locations_.size() + n * dim_);
  weights_.resize(weights_.size() + n);
  return first;
}

void Ensemble::clear() {
  locations_.clear();
  weights_.clear();
}

void Ensemble::reserve(std::size_t n) {
  locations_.reserve(n * dim_);
  weights_.reserve(n);
}

void Ensemble::check_invariants() const {
  if (locations_.size() != weights_.size() * dim_) throw InvariantError("location/weight arrays out of sync");
  for (double c : locations_) {
    if (!std::isfinite(c)) throw InvariantError("particle location is not finite");
  }
  for (double w : weights_) {
    if (!std::isfinite(w) || w == 0.0) throw InvariantError("particle weight must be finite and nonzero");
  }
}

double weak_sum(const Ensemble& ensemble, const TestFunction& testfn, const Exec& exec) {
  std::vector<double> partials(exec.chunks(ensemble.count()), 0.0);
  for_each_chunk(ensemble.count(), exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += ensemble.weight(i) * testfn(ensemble.location(i));
    partials[chunk] = acc;
  });
  return pairwise_sum(std::move(partials)) / static_cast<double>(ensemble.n0());
}

double signed_mass(const Ensemble& ensemble, const Exec& exec) {
  std::vector<double> partials(exec.chunks(ensemble.count()), 0.0);
  const auto w = ensemble.weights();
  for_each_chunk(ensemble.count(), exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += w[i];
    partials[chunk] = acc;
  });
  return pairwise_sum(std::move(partials)) / static_cast<double>(ensemble.n0());
}

}  // namespace spmbd
