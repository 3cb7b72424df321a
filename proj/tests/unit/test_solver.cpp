#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "spmbd/errors.hpp"
#include "spmbd/problems.hpp"
#include "spmbd/solver.hpp"
#include "stats.hpp"

using namespace spmbd;

namespace {

ProblemSpec frozen_benchmark() {
  ProblemSpec p = benchmark_1d();
  p.op = LinearOperator{{0.0}, 0.0};
  p.nonlinear.eval = [](double, std::span<const double>, double, std::span<const double>) { return 0.0; };
  return p;
}

SolverConfig small_config(double tau, double h, double T, std::size_t n0, std::uint64_t seed = 7) {
  SolverConfig c;
  c.tau = tau;
  c.h = h;
  c.T = T;
  c.n0 = n0;
  c.seed = seed;
  return c;
}

// Trapezoid rule on [-12, 12]; the integrands decay like exp(-x^2).
template <class F>
double integrate_1d(F f) {
  const double lo = -12.0, hi = 12.0, step = 1e-3;
  const int n = static_cast<int>((hi - lo) / step);
  double s = 0.5 * (f(lo) + f(hi));
  for (int i = 1; i < n; ++i) s += f(lo + i * step);
  return s * step;
}

bool same_rows(const RunRecord& a, const RunRecord& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const StepRow& x = a.rows[i];
    const StepRow& y = b.rows[i];
    if (x.time != y.time || x.count_before != y.count_before || x.particle_count != y.particle_count ||
        x.signed_mass != y.signed_mass || x.l1_mass != y.l1_mass || x.births != y.births ||
        x.annihilated != y.annihilated) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("benchmark initial weights all equal Z0") {
  const Solver s(benchmark_1d(), small_config(0.1, 0.1, 1.0, 5000));
  const double z0 = 1.75 * std::sqrt(std::numbers::pi);
  CHECK(z0 == doctest::Approx(3.1019).epsilon(1e-4));
  CHECK(s.ensemble().count() == 5000);
  for (double w : s.ensemble().weights()) REQUIRE(w == doctest::Approx(z0).epsilon(1e-12));
  CHECK(s.initial_acceptance_rate() > 0.1);
  CHECK(s.grid().signed_mass() == doctest::Approx(z0).epsilon(1e-12));
}

TEST_CASE("allen-cahn initial sign split matches quadrature") {
  const std::size_t n = 200000;
  const Solver s(allen_cahn(2), small_config(0.1, 0.3, 1.0, n));
  std::size_t negative = 0;
  for (double w : s.ensemble().weights()) negative += w < 0.0;
  // |u0|-measure of {u0 < 0} by 2-D trapezoid quadrature
  double neg = 0.0, all = 0.0, signed_total = 0.0;
  const double step = 0.02;
  for (double a = -9.0; a <= 11.0; a += step) {
    for (double b = -9.0; b <= 11.0; b += step) {
      const double u = allen_cahn_ref::u_ref(std::vector<double>{a, b}, 0.0);
      all += std::abs(u);
      signed_total += u;
      if (u < 0.0) neg -= u;
    }
  }
  const double q = neg / all;
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(n));
  CHECK(std::abs(static_cast<double>(negative) / n - q) < 3 * se);

  const double z0 = s.problem().initial.l1_norm;
  CHECK(all * step * step == doctest::Approx(z0).epsilon(1e-6));
  CHECK(std::abs(signed_total * step * step) < 1e-8);
  const double mass_se = 2.0 * z0 * se;
  CHECK(std::abs(s.grid().signed_mass()) < 3 * mass_se);
}

TEST_CASE("frozen dynamics leave the reconstruction unchanged") {
  SolverConfig c = small_config(0.1, 0.05, 1.0, 3000);
  c.n_a = 1.01;
  Solver s(frozen_benchmark(), c);
  const std::vector<double> before(s.grid().accumulated_weights().begin(), s.grid().accumulated_weights().end());
  for (int m = 0; m < 10; ++m) {
    const StepRow row = s.step();
    CHECK(row.births == 0);
    CHECK_FALSE(row.annihilated);
    CHECK(row.particle_count == 3000);
  }
  const auto after = s.grid().accumulated_weights();
  REQUIRE(after.size() == before.size());
  CHECK(std::equal(before.begin(), before.end(), after.begin()));
}

TEST_CASE("count equal to the threshold does not annihilate") {
  const std::size_t n0 = 1024;
  SolverConfig c = small_config(0.1, 0.1, 2.0, n0, 3);
  c.n_a = 1e9;
  const RunRecord free_run = run(benchmark_1d(), c);
  const std::size_t m = 8;
  const std::size_t threshold = free_run.rows[m].count_before;
  REQUIRE(threshold > n0);
  REQUIRE(free_run.rows[m + 1].count_before > threshold);

  c.n_a = static_cast<double>(threshold) / static_cast<double>(n0);
  REQUIRE(c.n_a * static_cast<double>(n0) == static_cast<double>(threshold));
  const RunRecord capped = run(benchmark_1d(), c);
  for (std::size_t i = 0; i <= m; ++i) {
    CHECK(capped.rows[i].count_before == free_run.rows[i].count_before);
    CHECK_FALSE(capped.rows[i].annihilated);
  }
  CHECK(capped.rows[m + 1].annihilated);
  CHECK(capped.rows[m + 1].particle_count == n0);
}

TEST_CASE("one benchmark step creates n0 tau integral |f| particles") {
  const double integral = integrate_1d([](double x) {
    const double u = benchmark::initial_value(x);
    return std::abs(u - u * u * u);
  });
  const std::size_t n0 = 1000000;
  const double tau = 0.01;
  std::vector<double> rates;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Solver s(benchmark_1d(), small_config(tau, 0.05, 1.0, n0, seed));
    const StepRow row = s.step();
    CHECK(s.ensemble().count() == n0 + row.births);
    rates.push_back(static_cast<double>(row.births) / (static_cast<double>(n0) * tau));
  }
  const auto m = spmbd::testing::moments(rates);
  CHECK(std::abs(m.mean - integral) < 3 * m.mean_se());
}

TEST_CASE("T equal to tau is a single step") {
  const RunRecord r = run(benchmark_1d(), small_config(0.1, 0.1, 0.1, 500));
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].time == 0.0);
  CHECK(r.rows[1].time == doctest::Approx(0.1));
  CHECK(r.final_ensemble->time() == doctest::Approx(0.1));
}

TEST_CASE("particle count sawtooth") {
  for (double na : {2.0, 3.0}) {
    SolverConfig c = small_config(0.05, 0.05, 5.0, 2000, 11);
    c.n_a = na;
    const RunRecord r = run(benchmark_1d(), c);
    std::uint64_t max_births = 0;
    for (const StepRow& row : r.rows) max_births = std::max(max_births, row.births);
    std::size_t events = 0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const StepRow& row = r.rows[i];
      CHECK(row.count_before > 0);
      CHECK(static_cast<double>(row.count_before) <= na * 2000 + static_cast<double>(max_births));
      CHECK(row.annihilated == (static_cast<double>(row.count_before) > na * 2000));
      if (row.annihilated) {
        ++events;
        CHECK(row.particle_count == 2000);
        REQUIRE(i + 1 < r.rows.size());
        CHECK(r.rows[i + 1].count_before == 2000 + row.births);
      }
      if (i > 0) CHECK(row.time > r.rows[i - 1].time);
    }
    CHECK(events >= 2);
  }
}

TEST_CASE("wall time accounting") {
  const RunRecord r = run(benchmark_1d(), small_config(0.1, 0.1, 2.0, 2000));
  double sum = 0.0;
  for (const StepRow& row : r.rows) {
    CHECK(row.wall_ms >= 0.0);
    sum += row.wall_ms;
  }
  CHECK(sum == doctest::Approx(r.total_wall_ms).epsilon(1e-12));
}

TEST_CASE("runs are bit-reproducible for a fixed seed and chunk size") {
  for (Method method : {Method::kBirthDeath, Method::kBaselineSpm}) {
    SolverConfig c = small_config(0.1, 0.1, 2.0, 4000, 99);
    c.method = method;
    c.exec = Exec{1, 1000};
    const RunRecord a = run(benchmark_1d(), c);
    c.exec = Exec{3, 1000};
    const RunRecord b = run(benchmark_1d(), c);
    CHECK(same_rows(a, b));
    CHECK(std::equal(a.final_ensemble->locations().begin(), a.final_ensemble->locations().end(),
                     b.final_ensemble->locations().begin(), b.final_ensemble->locations().end()));
    CHECK(std::equal(a.final_ensemble->weights().begin(), a.final_ensemble->weights().end(),
                     b.final_ensemble->weights().begin(), b.final_ensemble->weights().end()));
    c.seed = 100;
    CHECK_FALSE(same_rows(a, run(benchmark_1d(), c)));
  }
}

TEST_CASE("baseline SPM keeps n0 particles every step") {
  SolverConfig c = small_config(0.1, 0.1, 1.0, 3000);
  c.method = Method::kBaselineSpm;
  const RunRecord r = run(benchmark_1d(), c);
  for (std::size_t i = 0; i + 1 < r.rows.size(); ++i) {
    CHECK(r.rows[i].particle_count == 3000);
    CHECK(r.rows[i].births == 0);
    CHECK_FALSE(r.rows[i].annihilated);
  }
  CHECK(r.final_ensemble->count() == 3000);
}

TEST_CASE("errors are reported at the requested times") {
  SolverConfig c = small_config(0.1, 0.1, 1.0, 1000);
  c.report_times = {0.0, 0.5, 1.0};
  std::vector<double> seen;
  const RunRecord r = run(benchmark_1d(), c, [&](const Ensemble& e, const SparseGrid&, double t) {
    CHECK(e.time() == doctest::Approx(t));
    seen.push_back(t);
    return t + 1.0;
  });
  REQUIRE(r.errors.size() == 3);
  CHECK(r.errors[1].first == doctest::Approx(0.5));
  CHECK(r.errors[2].second == doctest::Approx(2.0));
  CHECK(r.rows[5].error == doctest::Approx(1.5));
  CHECK(std::isnan(r.rows[4].error));
  CHECK(r.rows.back().error == doctest::Approx(2.0));
  CHECK(default_report_times(0.01, 0.35) == std::vector<double>{0.1, 0.2, 0.3, 0.35});
  c.report_times = {0.55};
  CHECK_THROWS_AS(run(benchmark_1d(), c), ConfigError);
}

TEST_CASE("config validation") {
  const auto bad = [](auto mutate) {
    SolverConfig c = small_config(0.1, 0.1, 1.0, 100);
    mutate(c);
    return c;
  };
  CHECK_NOTHROW(small_config(0.1, 0.1, 1.0, 100).validate());
  CHECK(small_config(0.01, 0.1, 10.0, 100).steps() == 1000);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.tau = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.h = -1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.T = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.tau = 0.3; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.tau = 2.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.n0 = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](SolverConfig& c) { c.n_a = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(Solver(allen_cahn(2), bad([](SolverConfig& c) { c.n_a = 0.5; })), ConfigError);
  CHECK(parse_method("spm") == Method::kBaselineSpm);
  CHECK(parse_method(to_string(Method::kBirthDeath)) == Method::kBirthDeath);
  CHECK_THROWS_AS(parse_method("euler"), ConfigError);
}

TEST_CASE("initial sampler rejects data without mass") {
  InitialData zero = benchmark_1d().initial;
  zero.l1_norm = 0.0;
  Ensemble e(1, 10);
  CHECK_THROWS_AS(sample_initial(zero, 10, e, 1), ConfigError);
}

TEST_CASE("initial sampler doubles a short envelope") {
  InitialData data = benchmark_1d().initial;
  const double rate = data.sampler.envelope;
  data.sampler.envelope *= 0.3;
  Ensemble e(1, 20000);
  const double acceptance = sample_initial(data, 20000, e, 5);
  CHECK(e.count() == 20000);
  // after doubling twice the envelope is 1.2 times the original
  CHECK(acceptance == doctest::Approx(data.l1_norm / (1.2 * rate)).epsilon(0.05));
}

TEST_CASE("run csv") {
  const RunRecord r = run(benchmark_1d(), small_config(0.1, 0.1, 0.3, 200));
  std::ostringstream with, without;
  write_run_csv(with, r);
  write_run_csv(without, r, false);
  CHECK(with.str().rfind("time,count_before,particle_count,signed_mass,l1_mass,births,annihilated,wall_ms,error\n",
                         0) == 0);
  CHECK(without.str().rfind("time,count_before,particle_count,signed_mass,l1_mass,births,annihilated,error\n", 0) ==
        0);
  const std::string text = with.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  std::istringstream in(without.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.rfind("0,200,200,", 0) == 0);
  CHECK(line.back() == ',');
}
