#include <cmath>
#include <sstream>

#include "doctest.h"

#include "brwre/env.hpp"
#include "brwre/stats.hpp"
#include "oracles.hpp"

using namespace brwre;

namespace {

std::vector<OffspringLaw> law_battery() {
  return {OffspringLaw::geometric(0.5),
          OffspringLaw::geometric(0.2),
          OffspringLaw::geometric(0.8),
          OffspringLaw::linear_fractional(0.3, 0.6),
          OffspringLaw::linear_fractional(0.0, 0.25),
          OffspringLaw::linear_fractional(0.7, 0.9),
          OffspringLaw::explicit_masses({0.5, 0.5}),
          OffspringLaw::explicit_masses({0.0, 0.5, 0.5}),
          OffspringLaw::explicit_masses({0.1, 0.2, 0.3, 0.0, 0.4}),
          OffspringLaw::dirac(1),
          OffspringLaw::dirac(3)};
}

}  // namespace

TEST_CASE("pgf examples") {
  CHECK(pgf_eval(OffspringLaw::geometric(0.5), 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pgf_eval(OffspringLaw::explicit_masses({0.0, 0.5, 0.5}), 0.5) == doctest::Approx(0.375).epsilon(1e-15));
  for (const auto& law : law_battery()) CHECK(std::abs(pgf_eval(law, 1.0) - 1.0) <= 1e-12);
  CHECK_THROWS_AS(pgf_eval(OffspringLaw::geometric(0.5), 1.5), std::domain_error);
  CHECK_THROWS_AS(pgf_eval(OffspringLaw::geometric(0.5), -0.1), std::domain_error);
}

TEST_CASE("moments examples") {
  const auto d = moments(OffspringLaw::dirac(1), 2);
  CHECK(d.mean == 1.0);
  CHECK(d.tilde == 0.0);
  CHECK(d.kappa == 0.0);
  const auto g = moments(OffspringLaw::geometric(0.5), 1);
  CHECK(g.mean == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.tilde == doctest::Approx(2.0).epsilon(1e-14));
  const auto e = moments(OffspringLaw::explicit_masses({0.0, 0.5, 0.5}), 1);
  CHECK(e.mean == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(e.tilde == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
  CHECK(e.finite);
}

TEST_CASE("kappa of linear-fractional laws matches a direct tail sum") {
  for (const auto& law : {OffspringLaw::geometric(0.5), OffspringLaw::linear_fractional(0.3, 0.6),
                          OffspringLaw::linear_fractional(0.1, 0.95)}) {
    const oracle::Lf f = oracle::lf_of(law);
    for (int a : {1, 2, 5, 12}) {
      double sum = 0;
      for (int y = std::max(a, 1); y < 20000; ++y) sum += double(y) * y * (1 - f.p0) * (1 - f.b) * std::pow(f.b, y - 1);
      const double mean = oracle::lf_mean(f);
      CHECK(law.kappa(a) == doctest::Approx(sum / (mean * mean)).epsilon(1e-10));
    }
  }
}

TEST_CASE("invariant: pgf derivatives at 1 match cached moments") {
  for (const auto& law : law_battery()) {
    const double h = 1e-5;
    const double f1 = law.pgf(1.0);
    const double fm = law.pgf(1 - h);
    const double fm2 = law.pgf(1 - 2 * h);
    const double fm3 = law.pgf(1 - 3 * h);
    // Second-order one-sided differences, since the pgf is only defined on [0, 1].
    const double d1 = (3 * f1 - 4 * fm + fm2) / (2 * h);
    CHECK(d1 == doctest::Approx(law.mean()).epsilon(1e-6));
    if (law.family() == LawFamily::explicit_support) {
      const double d2 = (2 * f1 - 5 * fm + 4 * fm2 - fm3) / (h * h);
      const double expected = law.normalized_factorial_moment() * law.mean() * law.mean();
      if (expected == 0.0) {
        CHECK(std::abs(d2) <= 1e-4);
      } else {
        CHECK(d2 == doctest::Approx(expected).epsilon(1e-6 + 1e-4 / expected));
      }
    }
  }
}

TEST_CASE("invariant: pgf nondecreasing and convex on [0, 1]") {
  for (const auto& law : law_battery()) {
    double prev = law.pgf(0.0);
    double prev_slope = -1.0;
    for (int i = 1; i <= 200; ++i) {
      const double v = law.pgf(i / 200.0);
      const double slope = (v - prev) * 200.0;
      CHECK(v >= prev - 1e-15);
      CHECK(slope >= prev_slope - 1e-9);
      prev = v;
      prev_slope = slope;
    }
  }
}

TEST_CASE("invariant: geometric laws have F-tilde = 2") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 200; ++i) {
    const double p = u(rng);
    CHECK(OffspringLaw::geometric(p).normalized_factorial_moment() == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("explicit laws validate their masses") {
  CHECK_THROWS(OffspringLaw::explicit_masses({0.5, 0.4}));
  CHECK_THROWS(OffspringLaw::explicit_masses({-0.1, 1.1}));
  CHECK_THROWS(OffspringLaw::explicit_masses({1.0}));  // F̄ = 0
  CHECK_NOTHROW(OffspringLaw::explicit_masses({0.25, 0.75 + 5e-13}));
  CHECK_THROWS(OffspringLaw::explicit_masses(std::vector<double>(max_explicit_support + 2, 1.0 / (max_explicit_support + 2))));
}

TEST_CASE("sampling frequencies match masses") {
  Rng rng(3);
  for (const auto& law : {OffspringLaw::linear_fractional(0.3, 0.6), OffspringLaw::explicit_masses({0.1, 0.2, 0.3, 0.0, 0.4})}) {
    const int reps = 200000;
    std::vector<std::size_t> hits(6, 0);
    for (int i = 0; i < reps; ++i) {
      const auto k = law.sample(rng);
      if (k < hits.size()) ++hits[k];
    }
    for (std::size_t k = 0; k < hits.size(); ++k) {
      const auto e = proportion_estimate(hits[k], reps);
      CHECK(std::abs(e.mean - law.mass(k)) <= 3 * std::sqrt(law.mass(k) * (1 - law.mass(k)) / reps) + 1e-12);
    }
  }
}

TEST_CASE("sample_sum has the summed mean") {
  Rng rng(4);
  const auto law = OffspringLaw::linear_fractional(0.3, 0.6);
  std::vector<double> v;
  for (int i = 0; i < 20000; ++i) v.push_back(static_cast<double>(law.sample_sum(40, rng)));
  const auto e = mean_estimate(v);
  CHECK(std::abs(e.mean - 40 * law.mean()) <= 3 * e.standard_error);
}

TEST_CASE("sample_environment examples") {
  const auto model = EnvironmentModel::two_point(0.25);
  const Environment a = sample_environment(model, 4, 7);
  const Environment b = sample_environment(model, 4, 7);
  CHECK(a == b);
  CHECK(a.walk() == b.walk());
  const Environment big = sample_environment(model, 1000, 99);
  for (Eigen::Index i = 0; i < big.increments().size(); ++i) {
    CHECK(std::abs(std::abs(big.increments()(i)) - 0.25) <= 1e-12);
  }
  CHECK(std::abs(big.increments().mean()) <= 3 * 0.25 / std::sqrt(1000.0));
}

TEST_CASE("invariant: stored walk increments are the log-means") {
  for (const auto& model : {EnvironmentModel::two_point(0.25), EnvironmentModel::log_normal(0.3)}) {
    const Environment env = sample_environment(model, 200, 5);
    REQUIRE(env.walk().size() == 201);
    REQUIRE(env.increments().size() == 200);
    CHECK(env.walk()(0) == 0.0);
    for (std::size_t k = 1; k <= env.size(); ++k) {
      CHECK(env.walk()(k) == env.walk()(k - 1) + env.increments()(k - 1));
      CHECK(env.increments()(k - 1) == std::log(env.law(k).mean()));
    }
  }
}

TEST_CASE("criticality report examples") {
  const auto two = criticality_report(EnvironmentModel::two_point(0.25), 1000, 1);
  CHECK(two.enumerated);
  CHECK(two.mean_x.value == 0.0);
  CHECK(two.second_moment.value == doctest::Approx(0.0625).epsilon(1e-14));
  CHECK(two.ok());

  const auto flat = criticality_report(EnvironmentModel::fixed(OffspringLaw::geometric(0.5)), 1000, 1);
  CHECK(flat.variance_violation);
  CHECK_FALSE(flat.ok());

  const std::size_t n = 100000;
  const auto ln = criticality_report(EnvironmentModel::log_normal(0.3), n, 2);
  CHECK_FALSE(ln.enumerated);
  CHECK(std::abs(ln.mean_x.value) <= 3 * 0.3 / std::sqrt(double(n)));
  CHECK(ln.second_moment.value == doctest::Approx(0.09).epsilon(0.02));
  CHECK(ln.ok());
  CHECK(std::isfinite(ln.kappa_moment.value));

  CHECK_THROWS(criticality_report(EnvironmentModel::two_point(0.25), 999, 1));
}

TEST_CASE("environment text format round-trips") {
  std::vector<OffspringLaw> laws = law_battery();
  laws.push_back(OffspringLaw::geometric(1.0 / 3.0));
  const Environment env(laws);
  std::stringstream io;
  write_environment(io, env);
  const Environment back = read_environment(io);
  CHECK(back == env);
  CHECK(back.walk() == env.walk());
  std::istringstream bad("poisson 1.0\n");
  CHECK_THROWS(read_environment(bad));
}
