#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "spmbd/birth_death.hpp"
#include "spmbd/errors.hpp"
#include "spmbd/vug.hpp"
#include "stats.hpp"

using namespace spmbd;

namespace {

std::shared_ptr<CellLayout> layout_1d(double h, std::initializer_list<int> cells) {
  auto layout = std::make_shared<CellLayout>(1, h);
  for (int k : cells) layout->insert(std::vector<std::int32_t>{k});
  return layout;
}

// Grid whose cell k has average u[k] on the given cells.
SparseGrid grid_1d(double h, std::initializer_list<int> cells, std::vector<double> u, std::size_t n0) {
  auto layout = layout_1d(h, cells);
  std::vector<double> w(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) w[k] = u[k] * static_cast<double>(n0) * h;
  return SparseGrid(layout, std::move(w), n0);
}

rng::StreamFamily family(rng::Purpose purpose, std::uint64_t step, std::uint64_t seed = 5) {
  return {seed, rng::stream_id(purpose, step)};
}

std::vector<std::size_t> counts_per_cell(const Ensemble& e, const CellLayout& layout) {
  std::vector<std::size_t> counts(layout.size(), 0);
  std::int32_t idx[16];
  for (std::size_t i = 0; i < e.count(); ++i) {
    layout.locate(e.location(i), {idx, layout.dim()});
    const std::size_t k = layout.find({idx, layout.dim()});
    REQUIRE(k != CellLayout::npos);
    ++counts[k];
  }
  return counts;
}

}  // namespace

TEST_CASE("birth budget with an integral expectation") {
  const FieldGrid f(layout_1d(0.5, {0}), {5.0});
  rng::Stream s(1, 1, 0);
  const BirthBudget b = birth_budget(f, 10000, 0.1, s);
  CHECK(b.integral_abs_f == 2.5);
  CHECK(b.expected_births == doctest::Approx(2500.0).epsilon(1e-14));
  CHECK(b.realized_births == 2500);
}

TEST_CASE("birth budget rounds stochastically") {
  // n0 tau integral = 0.15
  const FieldGrid f(layout_1d(0.1, {0, 1}), {1.0, -0.5});
  const int reps = 100000;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    rng::Stream s(3, rng::stream_id(rng::Purpose::kBirthCount, r), 0);
    const BirthBudget b = birth_budget(f, 10, 0.1, s);
    REQUIRE(std::abs(static_cast<double>(b.realized_births) - b.expected_births) < 1.0);
    sum += static_cast<double>(b.realized_births);
  }
  CHECK(std::abs(sum / reps - 0.15) < 3 * std::sqrt(0.15 * 0.85 / reps));
}

TEST_CASE("vanishing field gives no births") {
  const FieldGrid f(layout_1d(0.1, {0, 4}), {0.0, 0.0});
  rng::Stream s(1, 1, 0);
  CHECK(birth_budget(f, 1000, 0.1, s).realized_births == 0);
  Ensemble out(1, 1000);
  sample_births(f, 0, family(rng::Purpose::kBirths, 0), {}, out);
  CHECK(out.empty());
  CHECK_THROWS_AS(sample_births(f, 3, family(rng::Purpose::kBirths, 0), {}, out), ConfigError);
}

TEST_CASE("births carry the sign of f") {
  const FieldGrid f(layout_1d(0.1, {2}), {-3.0});
  Ensemble out(1, 10);
  sample_births(f, 50, family(rng::Purpose::kBirths, 0), {}, out);
  REQUIRE(out.count() == 50);
  for (std::size_t i = 0; i < out.count(); ++i) CHECK(out.weight(i) == -1.0);
}

TEST_CASE("births in a single cell are uniform inside it") {
  auto layout = std::make_shared<CellLayout>(2, 0.25);
  layout->insert(std::vector<std::int32_t>{-3, 5});
  const FieldGrid f(layout, {0.7});
  Ensemble out(2, 10);
  sample_births(f, 20000, family(rng::Purpose::kBirths, 1), Exec{1, 4096}, out);
  std::vector<double> u0(out.count()), u1(out.count());
  for (std::size_t i = 0; i < out.count(); ++i) {
    const auto x = out.location(i);
    REQUIRE(x[0] >= -0.75);
    REQUIRE(x[0] < -0.5);
    REQUIRE(x[1] >= 1.25);
    REQUIRE(x[1] < 1.5);
    u0[i] = (x[0] + 0.75) / 0.25;
    u1[i] = (x[1] - 1.25) / 0.25;
  }
  const auto uniform_cdf = [](double v) { return std::clamp(v, 0.0, 1.0); };
  CHECK(spmbd::testing::ks_statistic(u0, uniform_cdf) < spmbd::testing::kKsCritical1pct);
  CHECK(spmbd::testing::ks_statistic(u1, uniform_cdf) < spmbd::testing::kKsCritical1pct);
}

TEST_CASE("births split between cells in proportion to |f|") {
  const FieldGrid f(layout_1d(0.1, {0, 7}), {3.0, -1.0});
  Ensemble out(1, 10);
  const std::size_t n = 100000;
  sample_births(f, n, family(rng::Purpose::kBirths, 2), {}, out);
  const auto counts = counts_per_cell(out, f.layout());
  const double p = 0.75;
  CHECK(std::abs(static_cast<double>(counts[0]) - p * n) < 3 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("birth weak mass matches tau times f in expectation") {
  const double h = 0.2, tau = 0.05;
  const std::size_t n0 = 2000;
  const std::vector<double> fv{1.3, -0.4, 2.2, -1.7, 0.25};
  const FieldGrid f(layout_1d(h, {-2, -1, 0, 3, 9}), fv);
  const int reps = 400;
  // phi = cell indicators plus one smooth test function
  std::vector<std::vector<double>> samples(fv.size() + 1, std::vector<double>(reps, 0.0));
  for (int r = 0; r < reps; ++r) {
    rng::Stream count_stream(8, rng::stream_id(rng::Purpose::kBirthCount, r), 0);
    const BirthBudget b = birth_budget(f, n0, tau, count_stream);
    Ensemble out(1, n0);
    sample_births(f, b.realized_births, family(rng::Purpose::kBirths, r, 8), {}, out);
    std::int32_t idx[1];
    for (std::size_t i = 0; i < out.count(); ++i) {
      f.layout().locate(out.location(i), idx);
      const std::size_t k = f.layout().find(std::span<const std::int32_t>(idx, 1));
      samples[k][r] += out.weight(i) / n0;
      samples[fv.size()][r] += out.weight(i) * std::sin(out.location(i)[0]) / n0;
    }
  }
  double smooth = 0.0;
  for (std::size_t k = 0; k < fv.size(); ++k) {
    const double a = f.layout().index(k)[0] * h;
    const auto m = spmbd::testing::moments(samples[k]);
    CHECK(std::abs(m.mean - tau * fv[k] * h) < 3 * m.mean_se());
    smooth += tau * fv[k] * (std::cos(a) - std::cos(a + h));
  }
  const auto m = spmbd::testing::moments(samples[fv.size()]);
  CHECK(std::abs(m.mean - smooth) < 3 * m.mean_se());
}

TEST_CASE("annihilation of a single cell") {
  const SparseGrid g = grid_1d(0.1, {4}, {5.0}, 1);
  const Ensemble e = annihilate(g, 1000, family(rng::Purpose::kAnnihilation, 0));
  REQUIRE(e.count() == 1000);
  for (std::size_t i = 0; i < e.count(); ++i) {
    CHECK(e.weight(i) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(e.location(i)[0] >= 0.4);
    CHECK(e.location(i)[0] < 0.5);
  }
}

TEST_CASE("annihilation of a symmetric signed grid") {
  const SparseGrid g = grid_1d(0.1, {0, 1}, {5.0, -5.0}, 1);
  const std::size_t n0 = 100000;
  const Ensemble e = annihilate(g, n0, family(rng::Purpose::kAnnihilation, 1));
  std::size_t positive = 0;
  for (std::size_t i = 0; i < e.count(); ++i) {
    CHECK(std::abs(e.weight(i)) == doctest::Approx(1.0).epsilon(1e-15));
    const bool left = e.location(i)[0] < 0.1;
    CHECK((e.weight(i) > 0) == left);
    positive += left;
  }
  CHECK(std::abs(static_cast<double>(positive) - 0.5 * n0) < 3 * std::sqrt(n0 * 0.25));
}

TEST_CASE("annihilation keeps the signed mass in expectation") {
  const SparseGrid g = grid_1d(0.05, {-3, -2, 0, 1, 2, 6}, {1.0, -2.5, 0.7, 3.1, -0.4, 1.9}, 100);
  const std::size_t n0 = 2000;
  std::vector<double> masses;
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    const Ensemble e = annihilate(g, n0, family(rng::Purpose::kAnnihilation, 0, seed));
    masses.push_back(signed_mass(e));
  }
  const auto m = spmbd::testing::moments(masses);
  CHECK(std::abs(m.mean - g.signed_mass()) < 3 * m.mean_se());
}

TEST_CASE("annihilation output shape and reconstruction") {
  // ten cells with mixed signs, >= 30 expected particles in each
  const std::vector<double> u{2.0, -1.0, 4.0, 3.0, -0.5, 1.5, -2.5, 0.8, 5.0, -3.3};
  const SparseGrid g = grid_1d(0.1, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, u, 50);
  const std::size_t n0 = 200000;
  const Ensemble e = annihilate(g, n0, family(rng::Purpose::kAnnihilation, 3), Exec{1, 8192});
  REQUIRE(e.count() == n0);
  const double z = g.l1_mass();
  for (std::size_t i = 0; i < e.count(); ++i) REQUIRE(std::abs(e.weight(i)) == z);
  const SparseGrid back = deposit(e, 0.1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double p = std::abs(u[k]) * 0.1 / z;
    REQUIRE(p * n0 >= 30.0);
    const double se = z * std::sqrt(p * (1 - p) / n0) / 0.1;
    const double got = back.cell_average_at(g.layout().index(k));
    CHECK(std::abs(got - u[k]) < 3 * se);
  }
}

TEST_CASE("annihilation of a vanishing reconstruction is fatal") {
  const SparseGrid g = grid_1d(0.1, {0}, {0.0}, 10);
  CHECK_THROWS_AS(annihilate(g, 10, family(rng::Purpose::kAnnihilation, 0)), DegenerateSolutionError);
}

TEST_CASE("annihilate_into releases the old ensemble") {
  const SparseGrid g = grid_1d(0.1, {0, 1}, {1.0, 2.0}, 10);
  Ensemble e(1, 10);
  for (int i = 0; i < 35; ++i) e.push_back(std::vector<double>{0.01 * i}, 1.0);
  annihilate_into(e, g, family(rng::Purpose::kAnnihilation, 0));
  CHECK(e.count() == 10);
}

TEST_CASE("baseline resample reduces to annihilation when f vanishes") {
  const SparseGrid g = grid_1d(0.1, {0, 1, 5}, {1.0, -2.0, 0.5}, 10);
  const FieldGrid zero(g.layout_ptr(), {0.0, 0.0, 0.0});
  const auto streams = family(rng::Purpose::kResample, 4);
  const Ensemble a = spm_full_resample(g, zero, 5000, 0.1, streams);
  const Ensemble b = annihilate(g, 5000, streams);
  CHECK(std::equal(a.locations().begin(), a.locations().end(), b.locations().begin()));
  CHECK(std::equal(a.weights().begin(), a.weights().end(), b.weights().begin()));
}

TEST_CASE("baseline resample follows |U + tau f|") {
  const SparseGrid g = grid_1d(0.1, {0, 1}, {1.0, 1.0}, 10);
  const FieldGrid f(g.layout_ptr(), {2.0, -4.0});
  const std::size_t n0 = 100000;
  const Ensemble e = spm_full_resample(g, f, n0, 0.1, family(rng::Purpose::kResample, 1));
  // g = (1.2, 0.6) so Z' = 0.18 and two thirds of the samples land in cell 0
  const auto counts = counts_per_cell(e, g.layout());
  CHECK(std::abs(e.weight(0)) == doctest::Approx(0.18).epsilon(1e-14));
  CHECK(std::abs(static_cast<double>(counts[0]) - n0 * 2.0 / 3.0) < 3 * std::sqrt(n0 * 2.0 / 9.0));

  const Ensemble tiny = spm_full_resample(g, f, 100, 1e-12, family(rng::Purpose::kResample, 1));
  CHECK(std::abs(tiny.weight(0)) == doctest::Approx(g.l1_mass()).epsilon(1e-10));
}

TEST_CASE("baseline resample of a cancelled cell is fatal") {
  const SparseGrid g = grid_1d(0.1, {0}, {1.0}, 10);
  const FieldGrid f(g.layout_ptr(), {-10.0});
  CHECK_THROWS_AS(spm_full_resample(g, f, 10, 0.1, family(rng::Purpose::kResample, 0)), DegenerateSolutionError);
  const FieldGrid foreign(layout_1d(0.1, {0}), {1.0});
  CHECK_THROWS_AS(spm_full_resample(g, foreign, 10, 0.1, family(rng::Purpose::kResample, 0)), ConfigError);
}
