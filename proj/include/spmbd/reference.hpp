#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace spmbd::reference {

/// Grid values of a periodic 1-D field on [-L, L) with n (power of two) points.
struct SpectralState {
  double half_width = 0.0;
  std::vector<double> values;
  double time = 0.0;

  std::size_t n_modes() const { return values.size(); }
  double spacing() const { return 2.0 * half_width / static_cast<double>(values.size()); }
  double x(std::size_t i) const { return -half_width + static_cast<double>(i) * spacing(); }
};

/// Samples u0 on the grid.
SpectralState sample(const std::function<double(double)>& u0, double half_width, std::size_t n_modes);

/// Exact flow of u' = u - u^3 over time t.
double nonlinear_flow(double u, double t);

/// Exact solver of u_t = b u_x + c u_xx on the periodic grid: mode k is
/// multiplied by exp(tau (i b k - c k^2)).
class LinearPropagator {
 public:
  LinearPropagator(std::size_t n_modes, double half_width, double advection = 1.0, double diffusion = 1.0);
  ~LinearPropagator();
  LinearPropagator(const LinearPropagator&) = delete;
  LinearPropagator& operator=(const LinearPropagator&) = delete;

  void apply(std::span<double> values, double tau);
  /// Symbol value for the m-th nonnegative wavenumber.
  std::complex<double> symbol(std::size_t m, double tau) const;

 private:
  struct Plans;
  std::size_t n_;
  double half_width_;
  double advection_;
  double diffusion_;
  std::unique_ptr<Plans> plans_;
};

SpectralState linear_step(const SpectralState& state, double tau, double advection = 1.0, double diffusion = 1.0);

struct StrangOptions {
  double advection = 1.0;
  double diffusion = 1.0;
  bool nonlinear = true;  // false replaces the reaction half-steps with the identity
};

/// T / tau repetitions of [reaction(tau/2), linear(tau), reaction(tau/2)].
/// on_step sees the state after every full step.
SpectralState strang_run(SpectralState state, double tau, double T, const StrangOptions& options = {},
                         const std::function<void(const SpectralState&)>& on_step = {});

/// True when |u| at the two boundary points is below rel * max |u|.
bool boundary_clean(const SpectralState& state, double rel = 1e-10);

/// Relative discrete L2 distance between two states on the same grid.
double relative_l2(const SpectralState& num, const SpectralState& ref);

/// Reference solution of the 1-D benchmark stored at a set of times and
/// interpolated (cubic Lagrange) in x; zero outside the periodic domain.
class ReferenceSolution {
 public:
  struct Options {
    double half_width = 64.0;
    std::size_t n_modes = std::size_t{1} << 14;
    double tau = 1e-3;
  };

  /// Runs the Strang solver to max(times) and snapshots each requested time
  /// (each must be a multiple of options.tau within 1e-9).
  static ReferenceSolution benchmark(std::span<const double> times, const Options& options);
  static ReferenceSolution benchmark(std::span<const double> times) { return benchmark(times, Options{}); }

  double operator()(double x, double t) const;
  const SpectralState& snapshot(double t) const;
  const std::vector<SpectralState>& snapshots() const { return snapshots_; }
  /// Boundary check over all snapshots.
  bool boundary_clean(double rel = 1e-10) const;

 private:
  std::vector<SpectralState> snapshots_;
};

/// Rows `time,x,u` for every snapshot.
void write_reference_csv(std::ostream& out, const ReferenceSolution& ref);

}  // namespace spmbd::reference
