#include "spmbd/reference.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <ostream>

#include "spmbd/problems.hpp"
#include "spmbd/errors.hpp"

namespace spmbd::reference {
namespace {

// FFTW planning is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t step_count(double T, double tau) {
  const double ratio = T / tau;
  const double rounded = std::round(ratio);
  if (!(tau > 0.0) || rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("T / tau must be a positive integer");
  }
  return static_cast<std::size_t>(rounded);
}

void reaction(std::vector<double>& values, double t) {
  const double growth = std::exp(t);
  const double growth2m1 = std::expm1(2.0 * t);
  for (double& u : values) u = u * growth / std::sqrt(1.0 + u * u * growth2m1);
}

}  // namespace

SpectralState sample(const std::function<double(double)>& u0, double half_width, std::size_t n_modes) {
  if (n_modes < 4 || (n_modes & (n_modes - 1)) != 0) throw ConfigError("n_modes must be a power of two >= 4");
  if (!(half_width > 0.0)) throw ConfigError("domain half-width must be positive");
  SpectralState s{half_width, std::vector<double>(n_modes), 0.0};
  for (std::size_t i = 0; i < n_modes; ++i) s.values[i] = u0(s.x(i));
  return s;
}

double nonlinear_flow(double u, double t) { return u * std::exp(t) / std::sqrt(1.0 + u * u * std::expm1(2.0 * t)); }

struct LinearPropagator::Plans {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
    fftw_free(real);
    fftw_free(spectrum);
  }
};

LinearPropagator::LinearPropagator(std::size_t n_modes, double half_width, double advection, double diffusion)
    : n_(n_modes), half_width_(half_width), advection_(advection), diffusion_(diffusion),
      plans_(std::make_unique<Plans>()) {
  if (n_modes < 4 || (n_modes & (n_modes - 1)) != 0) throw ConfigError("n_modes must be a power of two >= 4");
  std::lock_guard lock(planner_mutex());
  plans_->real = fftw_alloc_real(n_);
  plans_->spectrum = fftw_alloc_complex(n_ / 2 + 1);
  const int n = static_cast<int>(n_);
  plans_->forward = fftw_plan_dft_r2c_1d(n, plans_->real, plans_->spectrum, FFTW_ESTIMATE);
  plans_->backward = fftw_plan_dft_c2r_1d(n, plans_->spectrum, plans_->real, FFTW_ESTIMATE);
}

LinearPropagator::~LinearPropagator() = default;

std::complex<double> LinearPropagator::symbol(std::size_t m, double tau) const {
  const double k = std::numbers::pi * static_cast<double>(m) / half_width_;
  // The Nyquist coefficient of a real signal stays real: drop its phase.
  const double phase = (m == n_ / 2) ? 0.0 : advection_ * k * tau;
  return std::polar(std::exp(-diffusion_ * k * k * tau), phase);
}

void LinearPropagator::apply(std::span<double> values, double tau) {
  if (values.size() != n_) throw ConfigError("propagator size mismatch");
  std::copy(values.begin(), values.end(), plans_->real);
  fftw_execute(plans_->forward);
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t m = 0; m <= n_ / 2; ++m) {
    const std::complex<double> c(plans_->spectrum[m][0], plans_->spectrum[m][1]);
    const std::complex<double> out = c * symbol(m, tau) * inv_n;
    plans_->spectrum[m][0] = out.real();
    plans_->spectrum[m][1] = out.imag();
  }
  fftw_execute(plans_->backward);
  std::copy(plans_->real, plans_->real + n_, values.begin());
}

SpectralState linear_step(const SpectralState& state, double tau, double advection, double diffusion) {
  SpectralState out = state;
  if (tau == 0.0) return out;
  LinearPropagator prop(state.n_modes(), state.half_width, advection, diffusion);
  prop.apply(out.values, tau);
  out.time += tau;
  return out;
}

SpectralState strang_run(SpectralState state, double tau, double T, const StrangOptions& options,
                         const std::function<void(const SpectralState&)>& on_step) {
  const std::size_t steps = step_count(T, tau);
  LinearPropagator prop(state.n_modes(), state.half_width, options.advection, options.diffusion);
  const double start = state.time;
  for (std::size_t m = 0; m < steps; ++m) {
    if (options.nonlinear) reaction(state.values, 0.5 * tau);
    prop.apply(state.values, tau);
    if (options.nonlinear) reaction(state.values, 0.5 * tau);
    state.time = start + static_cast<double>(m + 1) * tau;
    for (double u : state.values) {
      if (!std::isfinite(u)) throw NumericalBlowupError("reference solver produced a non-finite value");
    }
    if (on_step) on_step(state);
  }
  return state;
}

bool boundary_clean(const SpectralState& state, double rel) {
  double peak = 0.0;
  for (double u : state.values) peak = std::max(peak, std::abs(u));
  const double edge = std::max(std::abs(state.values.front()), std::abs(state.values.back()));
  return edge <= rel * peak;
}

double relative_l2(const SpectralState& num, const SpectralState& ref) {
  if (num.values.size() != ref.values.size()) throw ConfigError("states live on different grids");
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < ref.values.size(); ++i) {
    diff += (num.values[i] - ref.values[i]) * (num.values[i] - ref.values[i]);
    norm += ref.values[i] * ref.values[i];
  }
  if (norm == 0.0) throw UndefinedMetricError("reference has zero L2 norm");
  return std::sqrt(diff / norm);
}

ReferenceSolution ReferenceSolution::benchmark(std::span<const double> times, const Options& options) {
  ReferenceSolution out;
  SpectralState state = sample(benchmark::initial_value, options.half_width, options.n_modes);
  std::vector<double> wanted(times.begin(), times.end());
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  std::vector<std::size_t> wanted_steps;
  for (double t : wanted) {
    if (t < 0.0) throw ConfigError("reference times must be nonnegative");
    if (t == 0.0) {
      wanted_steps.push_back(0);
    } else {
      wanted_steps.push_back(step_count(t, options.tau));
    }
  }
  std::size_t next = 0;
  while (next < wanted_steps.size() && wanted_steps[next] == 0) {
    out.snapshots_.push_back(state);
    ++next;
  }
  if (next == wanted_steps.size()) return out;
  std::size_t step = 0;
  strang_run(std::move(state), options.tau, static_cast<double>(wanted_steps.back()) * options.tau, {},
             [&](const SpectralState& s) {
               ++step;
               while (next < wanted_steps.size() && wanted_steps[next] == step) {
                 SpectralState snap = s;
                 snap.time = wanted[next];
                 out.snapshots_.push_back(std::move(snap));
                 ++next;
               }
             });
  return out;
}

const SpectralState& ReferenceSolution::snapshot(double t) const {
  for (const SpectralState& s : snapshots_) {
    if (std::abs(s.time - t) <= 1e-9 * std::max(1.0, std::abs(t))) return s;
  }
  throw ConfigError("no reference snapshot at t=" + std::to_string(t));
}

double ReferenceSolution::operator()(double x, double t) const {
  const SpectralState& s = snapshot(t);
  const double L = s.half_width;
  if (x < -L || x >= L) return 0.0;
  const double dx = s.spacing();
  const double pos = (x + L) / dx;
  const auto n = static_cast<std::ptrdiff_t>(s.n_modes());
  const auto i = static_cast<std::ptrdiff_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  auto at = [&](std::ptrdiff_t k) { return s.values[static_cast<std::size_t>(((k % n) + n) % n)]; };
  // Cubic Lagrange through nodes i-1, i, i+1, i+2.
  const double w0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
  const double w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
  const double w2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
  const double w3 = (f + 1.0) * f * (f - 1.0) / 6.0;
  return w0 * at(i - 1) + w1 * at(i) + w2 * at(i + 1) + w3 * at(i + 2);
}

bool ReferenceSolution::boundary_clean(double rel) const {
  return std::all_of(snapshots_.begin(), snapshots_.end(),
                     [rel](const SpectralState& s) { return reference::boundary_clean(s, rel); });
}

void write_reference_csv(std::ostream& out, const ReferenceSolution& ref) {
  const auto old_precision = out.precision(17);
  out << "time,x,u\n";
  for (const SpectralState& s : ref.snapshots()) {
    for (std::size_t i = 0; i < s.n_modes(); ++i) out << s.time << ',' << s.x(i) << ',' << s.values[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace spmbd::reference
