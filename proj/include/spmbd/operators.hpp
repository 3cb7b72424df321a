#pragma once

#include <functional>
#include <span>
#include <vector>

namespace spmbd {

/// Constant-coefficient L = b . grad + c Laplacian.
struct LinearOperator {
  std::vector<double> advection;  // b, one entry per dimension (zeros allowed)
  double diffusion = 0.0;         // c >= 0
};

/// Nonlinear term f(t, x, u, grad u).
struct NonlinearTerm {
  std::function<double(double t, std::span<const double> x, double u, std::span<const double> grad_u)> eval;
  /// When false the reconstruction skips gradient evaluation and passes zeros.
  bool uses_gradient = false;
};

}  // namespace spmbd
