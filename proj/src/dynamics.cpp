#include "spmbd/dynamics.hpp"

#include <cmath>
#include <vector>

#include "spmbd/errors.hpp"

namespace spmbd {

void advect(Ensemble& ensemble, std::span<const double> b, double tau) {
  if (!(tau > 0.0)) throw ConfigError("advect requires tau > 0");
  const std::size_t dim = ensemble.dim();
  if (b.size() != dim) throw ConfigError("advection vector has wrong dimension");
  bool zero = true;
  for (double bj : b) zero = zero && bj == 0.0;
  if (zero) return;
  auto x = ensemble.locations_mut();
  for (std::size_t i = 0; i < ensemble.count(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) x[i * dim + j] -= b[j] * tau;
  }
}

void diffuse(Ensemble& ensemble, double c, double tau, const rng::StreamFamily& streams, const Exec& exec) {
  if (!(tau > 0.0)) throw ConfigError("diffuse requires tau > 0");
  if (c < 0.0) throw ConfigError("diffusion coefficient must be nonnegative");
  if (c == 0.0) return;
  const double sigma = std::sqrt(2.0 * c * tau);
  const std::size_t dim = ensemble.dim();
  auto x = ensemble.locations_mut();
  for_each_chunk(ensemble.count(), exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    rng::Stream stream = streams.stream(chunk);
    for (std::size_t k = begin * dim; k < end * dim; ++k) x[k] += sigma * stream.normal();
  });
}

void apply_semigroup(Ensemble& ensemble, const LinearOperator& op, double tau, const rng::StreamFamily& streams,
                     const Exec& exec) {
  if (!(tau > 0.0)) throw ConfigError("apply_semigroup requires tau > 0");
  if (op.diffusion < 0.0) throw ConfigError("diffusion coefficient must be nonnegative");
  const std::size_t dim = ensemble.dim();
  if (op.advection.size() != dim) throw ConfigError("advection vector has wrong dimension");
  if (op.diffusion == 0.0) {
    advect(ensemble, op.advection, tau);
    return;
  }
  // Fused single pass; each coordinate is (x - b tau) + sigma y exactly as in
  // advect followed by diffuse.
  const double sigma = std::sqrt(2.0 * op.diffusion * tau);
  std::vector<double> shift(dim);
  for (std::size_t j = 0; j < dim; ++j) shift[j] = op.advection[j] * tau;
  auto x = ensemble.locations_mut();
  for_each_chunk(ensemble.count(), exec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    rng::Stream stream = streams.stream(chunk);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < dim; ++j) {
        double& c = x[i * dim + j];
        c -= shift[j];
        c += sigma * stream.normal();
      }
    }
  });
}

}  // namespace spmbd
