#include <cmath>
#include <vector>

#include "doctest.h"
#include "spmbd/dynamics.hpp"
#include "spmbd/errors.hpp"
#include "spmbd/rng.hpp"
#include "spmbd/vug.hpp"
#include "stats.hpp"

using namespace spmbd;
using spmbd::testing::moments;

namespace {

Ensemble at_origin(std::size_t dim, std::size_t n) {
  Ensemble e(dim, n);
  e.grow(n);
  auto x = e.locations_mut();
  std::fill(x.begin(), x.end(), 0.0);
  auto w = e.weights_mut();
  for (std::size_t i = 0; i < n; ++i) w[i] = (i % 2 ? -1.0 : 1.0) * (1.0 + static_cast<double>(i % 7));
  return e;
}

std::vector<double> component(const Ensemble& e, std::size_t j) {
  std::vector<double> out(e.count());
  for (std::size_t i = 0; i < e.count(); ++i) out[i] = e.location(i)[j];
  return out;
}

const rng::StreamFamily kStreams(77, rng::stream_id(rng::Purpose::kDiffusion, 0));

}  // namespace

TEST_CASE("advection moves against b") {
  Ensemble e(1, 1);
  e.push_back(std::vector<double>{0.0}, 1.0);
  advect(e, std::vector<double>{1.0}, 0.1);
  CHECK(e.location(0)[0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("zero coefficients are identities") {
  Ensemble e(2, 3);
  for (double v : {0.3, -1.2, 7.0}) e.push_back(std::vector<double>{v, -v}, v);
  const std::vector<double> before(e.locations().begin(), e.locations().end());
  advect(e, std::vector<double>{0.0, 0.0}, 0.5);
  diffuse(e, 0.0, 0.5, kStreams, {});
  apply_semigroup(e, LinearOperator{{0.0, 0.0}, 0.0}, 0.5, kStreams, {});
  CHECK(std::equal(before.begin(), before.end(), e.locations().begin()));
}

TEST_CASE("two half advections equal one full advection") {
  Ensemble a(2, 1), b(2, 1);
  a.push_back(std::vector<double>{0.7, -0.2}, 1.0);
  b.push_back(std::vector<double>{0.7, -0.2}, 1.0);
  const std::vector<double> v{1.0, -0.5};
  advect(a, v, 0.1);
  advect(a, v, 0.1);
  advect(b, v, 0.2);
  CHECK(a.location(0)[0] == doctest::Approx(b.location(0)[0]).epsilon(1e-15));
  CHECK(a.location(0)[1] == doctest::Approx(b.location(0)[1]).epsilon(1e-15));
}

TEST_CASE("diffusion displacement has mean 0 and variance 2 c tau") {
  const std::size_t n = 1000000;
  Ensemble e = at_origin(1, n);
  diffuse(e, 1.0, 0.1, kStreams, {});
  const auto m = moments(component(e, 0));
  CHECK(std::abs(m.mean) < 3 * m.mean_se());
  CHECK(std::abs(m.variance - 0.2) < 3 * m.variance_se());
}

TEST_CASE("semigroup with drift and diffusion") {
  const std::size_t n = 1000000;
  Ensemble e = at_origin(1, n);
  apply_semigroup(e, LinearOperator{{1.0}, 1.0}, 0.1, kStreams, {});
  const auto m = moments(component(e, 0));
  CHECK(std::abs(m.mean + 0.1) < 3 * m.mean_se());
  CHECK(std::abs(m.variance - 0.2) < 3 * m.variance_se());
}

TEST_CASE("every component diffuses in six dimensions") {
  const std::size_t n = 200000;
  Ensemble e = at_origin(6, n);
  apply_semigroup(e, LinearOperator{std::vector<double>(6, 0.0), 1.0}, 0.05, kStreams, {});
  for (std::size_t j = 0; j < 6; ++j) {
    const auto m = moments(component(e, j));
    CHECK(std::abs(m.mean) < 3 * m.mean_se());
    CHECK(std::abs(m.variance - 0.1) < 3 * m.variance_se());
  }
}

TEST_CASE("dynamics preserve count and weights") {
  Ensemble e = at_origin(2, 5000);
  const std::vector<double> w(e.weights().begin(), e.weights().end());
  apply_semigroup(e, LinearOperator{{0.5, -2.0}, 0.7}, 0.3, kStreams, {});
  CHECK(e.count() == 5000);
  CHECK(std::equal(w.begin(), w.end(), e.weights().begin()));
}

TEST_CASE("fused semigroup equals advect then diffuse bit for bit") {
  Ensemble a = at_origin(3, 3000), b = at_origin(3, 3000);
  const LinearOperator op{{0.3, -1.1, 2.0}, 0.4};
  const Exec exec{1, 512};
  apply_semigroup(a, op, 0.05, kStreams, exec);
  advect(b, op.advection, 0.05);
  diffuse(b, op.diffusion, 0.05, kStreams, exec);
  CHECK(std::equal(a.locations().begin(), a.locations().end(), b.locations().begin()));
}

TEST_CASE("diffusion is reproducible and thread-count independent") {
  Ensemble a = at_origin(2, 10000), b = at_origin(2, 10000);
  diffuse(a, 1.0, 0.1, kStreams, Exec{1, 1024});
  diffuse(b, 1.0, 0.1, kStreams, Exec{3, 1024});
  CHECK(std::equal(a.locations().begin(), a.locations().end(), b.locations().begin()));
}

TEST_CASE("second moment of a diffused Gaussian deposit") {
  const std::size_t n = 500000;
  Ensemble e(1, n);
  rng::Stream s(12, 0, 0);
  const double sigma0 = 0.8;
  for (std::size_t i = 0; i < n; ++i) e.push_back(std::vector<double>{sigma0 * s.normal()}, 1.0);
  apply_semigroup(e, LinearOperator{{0.0}, 0.5}, 0.4, kStreams, {});
  const double h = 0.02;
  const SparseGrid g = deposit(e, h);
  double m2 = 0.0, mass = 0.0;
  std::vector<double> c(1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    g.layout().center(k, c);
    m2 += g.average(k) * h * (c[0] * c[0] + h * h / 12.0);
    mass += g.average(k) * h;
  }
  const double expect = sigma0 * sigma0 + 2 * 0.5 * 0.4;
  // standard error of the second moment of a Gaussian is sqrt(2/n) var
  CHECK(std::abs(m2 / mass - expect) < 3 * std::sqrt(2.0 / n) * expect);
}

TEST_CASE("invalid arguments") {
  Ensemble e = at_origin(1, 10);
  CHECK_THROWS_AS(advect(e, std::vector<double>{1.0}, 0.0), ConfigError);
  CHECK_THROWS_AS(advect(e, std::vector<double>{1.0, 2.0}, 0.1), ConfigError);
  CHECK_THROWS_AS(diffuse(e, -1.0, 0.1, kStreams, {}), ConfigError);
  CHECK_THROWS_AS(diffuse(e, 1.0, -0.1, kStreams, {}), ConfigError);
  CHECK_THROWS_AS(apply_semigroup(e, LinearOperator{{1.0}, 1.0}, 0.0, kStreams, {}), ConfigError);
}
