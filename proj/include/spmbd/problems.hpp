#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "spmbd/operators.hpp"
#include "spmbd/rng.hpp"

namespace spmbd {

/// Rejection-sampling recipe for |u0|: a proposal with known density and an
/// envelope constant C >= sup |u0| / q.
struct ProposalSampler {
  std::function<void(rng::Stream&, std::span<double>)> draw;
  std::function<double(std::span<const double>)> density;
  double envelope = 0.0;
};

struct InitialData {
  std::function<double(std::span<const double>)> value;
  double l1_norm = 0.0;  // Z0 = integral |u0|
  ProposalSampler sampler;
};

/// Analytical reference: u_ref(x, t) and its (x1, x2) projection M_ref.
struct AnalyticReference {
  std::function<double(std::span<const double>, double)> solution;
  std::function<double(double, double, double)> projection;
};

struct ProblemSpec {
  std::string name;
  std::size_t dim = 1;
  LinearOperator op;
  NonlinearTerm nonlinear;
  InitialData initial;
  std::optional<AnalyticReference> reference;
};

/// u_t = u_x + u_xx + u - u^3, u0 = exp(-x^2)(1 + x^4).
ProblemSpec benchmark_1d();

/// d-D Allen-Cahn u_t = Laplacian u + u - u^3 + r with a manufactured
/// two-Gaussian solution. Requires d >= 2.
ProblemSpec allen_cahn(std::size_t d);

/// Problem by CLI name: "benchmark1d" or "allen-cahn".
ProblemSpec make_problem(const std::string& name, std::size_t dim);

namespace benchmark {
double initial_value(double x);

/// Audit window for the T = 10 error; it holds all but ~1e-10 of the
/// reference mass (both fronts travel at speed 2 around a drift of -1).
inline constexpr double kAuditLo = -50.0;
inline constexpr double kAuditHi = 30.0;
}  // namespace benchmark

namespace allen_cahn_ref {

inline constexpr double kDiffusion = 1.0;

/// (x1 + x2) / (pi s)^{d/2} [exp(-|x - p1|^2 / s) + 2 exp(-|x - p2|^2 / s)],
/// s = 1 + 4ct, p1 = (2, 2, 0, ...), p2 = (-1, -1, 0, ...); d = x.size().
double u_ref(std::span<const double> x, double t);

/// r = u_t - c Laplacian u - u + u^3 evaluated in closed form.
double forcing_r(std::span<const double> x, double t);

/// integral of u_ref over x3..xd; independent of d.
double m_ref(double x1, double x2, double t);

/// Z0 = integral |u_ref(., 0)|; independent of d.
double initial_l1_norm();

}  // namespace allen_cahn_ref

}  // namespace spmbd
