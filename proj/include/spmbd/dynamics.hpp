#pragma once

#include <span>

#include "spmbd/operators.hpp"
#include "spmbd/parallel.hpp"
#include "spmbd/particles.hpp"
#include "spmbd/rng.hpp"

namespace spmbd {

/// Characteristic shift x <- x - b tau (action of exp(tau L*) for L = b . grad).
void advect(Ensemble& ensemble, std::span<const double> b, double tau);

/// Brownian kick x <- x + y, y ~ N(0, 2 c tau I). Chunk k draws from streams.stream(k).
void diffuse(Ensemble& ensemble, double c, double tau, const rng::StreamFamily& streams, const Exec& exec = {});

/// advect then diffuse. Counts and weights are untouched.
void apply_semigroup(Ensemble& ensemble, const LinearOperator& op, double tau, const rng::StreamFamily& streams,
                     const Exec& exec = {});

}  // namespace spmbd
