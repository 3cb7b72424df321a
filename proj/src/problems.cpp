#include "spmbd/problems.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "spmbd/errors.hpp"

namespace spmbd {
namespace {

constexpr double kPi = std::numbers::pi;

// Proposal variance per dimension for the Allen-Cahn mixture: 1.5 times the
// initial Gaussian variance 1/2.
constexpr double kMixtureVariance = 0.75;

double grid_search_envelope(const std::function<double(double, double)>& ratio, double lo, double hi, double step) {
  double best = 0.0;
  for (double a = lo; a <= hi; a += step) {
    for (double b = lo; b <= hi; b += step) best = std::max(best, ratio(a, b));
  }
  return best;
}

}  // namespace

namespace benchmark {

double initial_value(double x) {
  const double x2 = x * x;
  return std::exp(-x2) * (1.0 + x2 * x2);
}

}  // namespace benchmark

ProblemSpec benchmark_1d() {
  ProblemSpec p;
  p.name = "benchmark1d";
  p.dim = 1;
  p.op = {{1.0}, 1.0};
  p.nonlinear = {[](double, std::span<const double>, double u, std::span<const double>) { return u - u * u * u; },
                 false};
  p.initial.value = [](std::span<const double> x) { return benchmark::initial_value(x[0]); };

  double error = 0.0;
  p.initial.l1_norm = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [](double x) { return benchmark::initial_value(x); }, -std::numeric_limits<double>::infinity(),
      std::numeric_limits<double>::infinity(), 15, 1e-13, &error);

  const double norm = 1.0 / std::sqrt(2.0 * kPi);
  auto density = [norm](std::span<const double> x) { return norm * std::exp(-0.5 * x[0] * x[0]); };
  double envelope = 0.0;
  for (double x = -12.0; x <= 12.0; x += 1e-3) {
    envelope = std::max(envelope, benchmark::initial_value(x) / (norm * std::exp(-0.5 * x * x)));
  }
  p.initial.sampler = {[](rng::Stream& s, std::span<double> out) { out[0] = s.normal(); }, density, 1.05 * envelope};
  return p;
}

namespace allen_cahn_ref {
namespace {

struct Centre {
  double a1, a2, amplitude;
};
constexpr Centre kCentres[2] = {{2.0, 2.0, 1.0}, {-1.0, -1.0, 2.0}};

double squared_offset(std::span<const double> x, const Centre& c) {
  double r2 = (x[0] - c.a1) * (x[0] - c.a1) + (x[1] - c.a2) * (x[1] - c.a2);
  for (std::size_t j = 2; j < x.size(); ++j) r2 += x[j] * x[j];
  return r2;
}

// E|Y| for Y ~ N(mu, 1).
double folded_normal_mean(double mu) {
  return mu * std::erf(mu / std::numbers::sqrt2) + 2.0 * std::exp(-0.5 * mu * mu) / std::sqrt(2.0 * kPi);
}

}  // namespace

double u_ref(std::span<const double> x, double t) {
  const double s = 1.0 + 4.0 * kDiffusion * t;
  const double norm = std::pow(kPi * s, -0.5 * static_cast<double>(x.size()));
  double g = 0.0;
  for (const Centre& c : kCentres) g += c.amplitude * std::exp(-squared_offset(x, c) / s);
  return (x[0] + x[1]) * norm * g;
}

double forcing_r(std::span<const double> x, double t) {
  const double s = 1.0 + 4.0 * kDiffusion * t;
  const double norm = std::pow(kPi * s, -0.5 * static_cast<double>(x.size()));
  const double sum = x[0] + x[1];
  double g = 0.0;
  double transport = 0.0;  // u_t - c Laplacian u = -2c (d1 + d2) G
  for (const Centre& c : kCentres) {
    const double gi = c.amplitude * norm * std::exp(-squared_offset(x, c) / s);
    g += gi;
    transport += gi * 4.0 * kDiffusion * (sum - c.a1 - c.a2) / s;
  }
  const double u = sum * g;
  return transport - u + u * u * u;
}

double m_ref(double x1, double x2, double t) {
  const double s = 1.0 + 4.0 * kDiffusion * t;
  double g = 0.0;
  for (const Centre& c : kCentres) {
    g += c.amplitude * std::exp(-((x1 - c.a1) * (x1 - c.a1) + (x2 - c.a2) * (x2 - c.a2)) / s);
  }
  return (x1 + x2) * g / (kPi * s);
}

double initial_l1_norm() {
  // x1 + x2 ~ N(a1 + a2, 1) under each normalized Gaussian factor.
  double z = 0.0;
  for (const Centre& c : kCentres) z += c.amplitude * folded_normal_mean(c.a1 + c.a2);
  return z;
}

}  // namespace allen_cahn_ref

ProblemSpec allen_cahn(std::size_t d) {
  if (d < 2) throw ConfigError("allen-cahn requires dimension >= 2");
  ProblemSpec p;
  p.name = "allen-cahn";
  p.dim = d;
  p.op = {std::vector<double>(d, 0.0), allen_cahn_ref::kDiffusion};
  p.nonlinear = {[](double t, std::span<const double> x, double u, std::span<const double>) {
                   return u - u * u * u + allen_cahn_ref::forcing_r(x, t);
                 },
                 false};
  p.initial.value = [](std::span<const double> x) { return allen_cahn_ref::u_ref(x, 0.0); };
  p.initial.l1_norm = allen_cahn_ref::initial_l1_norm();

  const double dd = static_cast<double>(d);
  const double component_norm = std::pow(2.0 * kPi * kMixtureVariance, -0.5 * dd);
  auto density = [component_norm](std::span<const double> x) {
    double q = 0.0;
    for (const double centre : {2.0, -1.0}) {
      double r2 = (x[0] - centre) * (x[0] - centre) + (x[1] - centre) * (x[1] - centre);
      for (std::size_t j = 2; j < x.size(); ++j) r2 += x[j] * x[j];
      q += 0.5 * component_norm * std::exp(-r2 / (2.0 * kMixtureVariance));
    }
    return q;
  };
  auto draw = [](rng::Stream& s, std::span<double> out) {
    const double centre = s.uniform() < 0.5 ? 2.0 : -1.0;
    const double sigma = std::sqrt(kMixtureVariance);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (j < 2 ? centre : 0.0) + sigma * s.normal();
  };
  // |u0| / q is maximal at x3 = ... = xd = 0, so a 2-D search suffices.
  std::vector<double> probe(d, 0.0);
  const double envelope = grid_search_envelope(
      [&](double a, double b) {
        probe[0] = a;
        probe[1] = b;
        return std::abs(allen_cahn_ref::u_ref(probe, 0.0)) / density(probe);
      },
      -8.0, 8.0, 0.02);
  p.initial.sampler = {draw, density, 1.05 * envelope};
  p.reference = AnalyticReference{[](std::span<const double> x, double t) { return allen_cahn_ref::u_ref(x, t); },
                                  [](double x1, double x2, double t) { return allen_cahn_ref::m_ref(x1, x2, t); }};
  return p;
}

ProblemSpec make_problem(const std::string& name, std::size_t dim) {
  if (name == "benchmark1d") {
    if (dim != 1) throw ConfigError("benchmark1d is one-dimensional");
    return benchmark_1d();
  }
  if (name == "allen-cahn") return allen_cahn(dim);
  throw ConfigError("unknown problem '" + name + "' (expected benchmark1d or allen-cahn)");
}

}  // namespace spmbd
