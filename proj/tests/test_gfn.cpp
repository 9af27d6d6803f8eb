#include <cmath>

#include "doctest.h"

#include "brwre/gfn.hpp"
#include "brwre/stats.hpp"
#include "oracles.hpp"

using namespace brwre;

namespace {

std::vector<oracle::Lf> lf_laws(const Environment& env) {
  std::vector<oracle::Lf> out;
  for (const auto& law : env.laws()) out.push_back(oracle::lf_of(law));
  return out;
}

Environment random_lf_env(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> p0(0.05, 0.7);
  std::uniform_real_distribution<double> b(0.1, 0.8);
  std::vector<OffspringLaw> laws;
  for (std::size_t i = 0; i < n; ++i) laws.push_back(OffspringLaw::linear_fractional(p0(rng), b(rng)));
  return Environment(laws);
}

// Survival for explicit laws by composing the pgfs numerically.
std::vector<double> explicit_survival(const std::vector<std::vector<double>>& laws) {
  const std::size_t n = laws.size();
  std::vector<double> p(n + 1, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t j = n; j > k; --j) s = oracle::explicit_pgf(laws[j - 1], s);
    p[k] = 1 - s;
  }
  return p;
}

}  // namespace

TEST_CASE("survival examples") {
  const Environment env(std::vector<OffspringLaw>(2, OffspringLaw::geometric(0.5)));
  const auto t = survival_table(env, 2);
  CHECK(t(2) == 1.0);
  CHECK(t(1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  const Environment flat(std::vector<OffspringLaw>(500, OffspringLaw::geometric(0.5)));
  CHECK(survival_table(flat, 500)(0) == doctest::Approx(1.0 / 501).epsilon(1e-11));
  const Environment dirac(std::vector<OffspringLaw>(7, OffspringLaw::dirac(1)));
  for (int k = 0; k <= 7; ++k) CHECK(survival_table(dirac, 7)(k) == 1.0);
}

TEST_CASE("linear-fractional survival matches closed form and Möbius composition") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Environment env = random_lf_env(60, seed);
    const auto closed = oracle::lf_survival(lf_laws(env));
    const auto mob = oracle::mobius_survival(lf_laws(env));
    const auto t = survival_table(env, 60);
    for (int k = 0; k <= 60; ++k) {
      CHECK(t(k) == doctest::Approx(closed[k]).epsilon(1e-10));
      CHECK(t(k) == doctest::Approx(mob[k]).epsilon(1e-8));
    }
  }
  const Environment model_env = sample_environment(EnvironmentModel::two_point(0.25), 400, 3);
  const auto closed = oracle::lf_survival(lf_laws(model_env));
  const auto t = survival_table(model_env, 400);
  for (int k = 0; k <= 400; k += 10) CHECK(t(k) == doctest::Approx(closed[k]).epsilon(1e-10));
}

TEST_CASE("explicit survival matches pgf composition") {
  const std::vector<std::vector<double>> masses{{0.2, 0.3, 0.5}, {0.5, 0.0, 0.25, 0.25}, {0.1, 0.9},
                                                {0.4, 0.1, 0.1, 0.4}, {0.3, 0.3, 0.4}};
  std::vector<OffspringLaw> laws;
  for (const auto& m : masses) laws.push_back(OffspringLaw::explicit_masses(m));
  const Environment env(laws);
  const auto expected = explicit_survival(masses);
  const auto t = survival_table(env, 5);
  for (int k = 0; k <= 5; ++k) CHECK(t(k) == doctest::Approx(expected[k]).epsilon(1e-13));
}

TEST_CASE("invariant: survival nonincreasing in n") {
  const Environment env = sample_environment(EnvironmentModel::two_point(0.5), 200, 11);
  double prev_root = 1.0;
  for (int n = 1; n <= 200; ++n) {
    const auto t = survival_table(env, n);
    CHECK(t(0) <= prev_root * (1 + 1e-12));
    prev_root = t(0);
    // P(k-1,n) <= e^{X_k} P(k,n) by convexity.
    for (int k = 1; k <= n; ++k) CHECK(t(k - 1) <= env.law(k).mean() * t(k) * (1 + 1e-12));
  }
}

TEST_CASE("tiny survival stays representable in logs") {
  const Environment env(std::vector<OffspringLaw>(3000, OffspringLaw::linear_fractional(0.9, 0.5)));
  const auto t = survival_table(env, 3000);
  CHECK(std::isfinite(t.log_p(0)));
  CHECK(t.log_p(0) < -700);
  // Subcritical with mean 0.2: log P(0,n) ≈ n log 0.2 + const.
  CHECK((t.log_p(0) - t.log_p(1000)) == doctest::Approx(1000 * std::log(0.2)).epsilon(1e-6));
}

TEST_CASE("reduced pgf") {
  const Environment env = random_lf_env(12, 5);
  const auto t = survival_table(env, 12);
  const auto laws = lf_laws(env);
  for (int k = 1; k <= 12; ++k) {
    CHECK(std::abs(reduced_pgf(env, t, k, 12, 0.0)) <= 1e-12);
    CHECK(reduced_pgf(env, t, k, 12, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double s : {0.25, 0.5, 0.9}) {
      const oracle::Lf f = laws[k - 1];
      const double u = 1 - t(k) + s * t(k);
      const double fu = oracle::evaluate(oracle::mobius_of(f), u);
      CHECK(reduced_pgf(env, t, k, 12, s) == doctest::Approx((fu - 1 + t(k - 1)) / t(k - 1)).epsilon(1e-10));
    }
    // Reduced law of a linear-fractional step is the stated geometric.
    const OffspringLaw r = reduced_law(env, t, k);
    const double b = laws[k - 1].b;
    CHECK(r.zero_mass() == 0.0);
    CHECK(r.ratio() == doctest::Approx(b * t(k) / (1 - b + b * t(k))).epsilon(1e-12));
    for (double s : {0.1, 0.5, 0.8}) CHECK(r.pgf(s) == doctest::Approx(reduced_pgf(env, t, k, 12, s)).epsilon(1e-10));
  }
  const Environment expl({OffspringLaw::explicit_masses({0.5, 0.5})});
  CHECK_THROWS(reduced_law(expl, survival_table(expl, 1), 1));
}

TEST_CASE("invariant: reduced moments are pgf derivatives") {
  const std::vector<std::vector<double>> masses{{0.2, 0.3, 0.5}, {0.5, 0.0, 0.25, 0.25}, {0.1, 0.9}, {0.4, 0.1, 0.1, 0.4}};
  std::vector<OffspringLaw> laws;
  for (const auto& m : masses) laws.push_back(OffspringLaw::explicit_masses(m));
  for (const Environment& env : {Environment(laws), random_lf_env(10, 8)}) {
    const int n = static_cast<int>(env.size());
    const auto t = survival_table(env, n);
    for (int k = 1; k <= n; ++k) {
      const double h = 1e-4;
      auto g = [&](double s) { return reduced_pgf(env, t, k, n, s); };
      const double d1 = (3 * g(1) - 4 * g(1 - h) + g(1 - 2 * h)) / (2 * h);
      const double d2 = (2 * g(1) - 5 * g(1 - h) + 4 * g(1 - 2 * h) - g(1 - 3 * h)) / (h * h);
      const auto m = reduced_moments(env, t, k, n);
      CHECK(d1 == doctest::Approx(m.mean).epsilon(1e-6));
      CHECK(d2 == doctest::Approx(m.tilde * m.mean * m.mean).epsilon(1e-3));
      CHECK(m.mean == doctest::Approx(t(k) / t(k - 1) * env.law(k).mean()).epsilon(1e-12));
    }
  }
}

TEST_CASE("invariant: reduced means telescope to the mean profile") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Environment env = sample_environment(EnvironmentModel::two_point(0.25), 80, seed);
    const auto t = survival_table(env, 80);
    const auto mech = reduced_mechanism(env, t);
    const auto profile = reduced_mean_profile(env, t);
    CHECK(profile(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(profile(80) == doctest::Approx(std::exp(env.walk(80)) / t(0)).epsilon(1e-10));
    double prod = 1.0;
    for (int k = 1; k <= 80; ++k) {
      prod *= mech.mean(k - 1);
      CHECK(prod == doctest::Approx(profile(k)).epsilon(1e-10));
      CHECK(mech.mean(k - 1) >= 1.0 - 1e-12);
    }
  }
}

TEST_CASE("agresti bounds") {
  SUBCASE("single lineage is exact") {
    const Environment env(std::vector<OffspringLaw>(5, OffspringLaw::dirac(1)));
    const auto b = agresti_bounds(env, 0, 5);
    CHECK(b.lower == 0.0);
    CHECK(b.upper == 0.0);
  }
  SUBCASE("sandwich on random environments") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const Environment env = sample_environment(EnvironmentModel::two_point(0.5), 150, seed);
      const auto t = survival_table(env, 150);
      for (int k = 0; k <= 150; k += 5) {
        const auto b = agresti_bounds(env, k, 150);
        double walk_min = env.walk(k);
        for (int j = k; j <= 150; ++j) walk_min = std::min(walk_min, env.walk(j));
        CHECK(b.upper == doctest::Approx(walk_min - env.walk(k)).epsilon(1e-12));
        CHECK(b.lower <= t.log_p(k));
        CHECK(t.log_p(k) <= b.upper);
      }
    }
  }
}

TEST_CASE("reduced tree sampler") {
  const Environment env = sample_environment(EnvironmentModel::two_point(0.5), 20, 17);
  const auto t = survival_table(env, 20);
  const auto profile = reduced_mean_profile(env, t);
  SimulationOptions opts;
  opts.keep_ancestry = true;

  // Full trees conditioned on survival, reduced by the ancestry oracle.
  std::vector<std::vector<double>> full(21);
  std::vector<double> full_max;
  Rng rng(5);
  while (full_max.size() < 6000) {
    const TreeSample tree = simulate_quenched(env, 20, rng, opts);
    if (!tree.alive_at_horizon()) continue;
    const auto c = oracle::ancestor_counts(tree, 20);
    for (int k = 0; k <= 20; ++k) full[k].push_back(double(c[k]));
    full_max.push_back(tree.generation_max.back());
  }
  std::vector<std::vector<double>> reduced(21);
  std::vector<double> reduced_max;
  for (int i = 0; i < 6000; ++i) {
    const TreeSample tree = simulate_reduced(env, t, rng, opts);
    REQUIRE(tree.alive_at_horizon());
    const auto c = reduced_counts(tree, 20).counts;
    for (int k = 0; k <= 20; ++k) {
      CHECK(c[k] == tree.population[k]);
      reduced[k].push_back(double(c[k]));
    }
    reduced_max.push_back(tree.generation_max.back());
  }
  for (int k : {5, 10, 15, 20}) {
    const auto f = mean_estimate(full[k]);
    const auto r = mean_estimate(reduced[k]);
    CHECK(std::abs(f.mean - profile(k)) <= 3.5 * f.standard_error);
    CHECK(std::abs(r.mean - profile(k)) <= 3.5 * r.standard_error);
  }
  // Two-sample KS at the 0.1% level for 6000 vs 6000.
  CHECK(ks_two_sample(full_max, reduced_max) <= 1.95 * std::sqrt(2.0 / 6000));
}

TEST_CASE("two geometric generations by hand") {
  const Environment env(std::vector<OffspringLaw>(2, OffspringLaw::geometric(0.5)));
  const auto t = survival_table(env, 2);
  CHECK(reduced_moments(env, t, 1, 2).mean == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(reduced_mean_profile(env, t)(1) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(reduced_mean_profile(env, t)(0) == 1.0);
  const auto b = agresti_bounds(env, 0, 2);
  CHECK(b.upper == 0.0);
  CHECK(b.lower == doctest::Approx(-std::log(5.0)).epsilon(1e-14));
  CHECK(b.lower <= std::log(1.0 / 3.0));
  CHECK(std::log(1.0 / 3.0) <= b.upper);
  const auto top = agresti_bounds(env, 2, 2);
  CHECK(top.lower == 0.0);
  CHECK(top.upper == 0.0);
  CHECK(t.log_p(2) == 0.0);

  const Environment one({OffspringLaw::geometric(0.5)});
  CHECK(reduced_pgf(one, survival_table(one, 1), 1, 1, 0.5) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("invariant: backward recursion and ranges") {
  const auto model = EnvironmentModel::two_point(0.5);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Environment env = sample_environment(model, 120, seed);
    const auto t = survival_table(env, 120);
    CHECK(t(120) == 1.0);
    for (int k = 0; k < 120; ++k) {
      CHECK(t(k) > 0.0);
      CHECK(t(k) <= 1.0);
      CHECK(std::abs((1 - t(k)) - env.law(k + 1).pgf(1 - t(k + 1))) <= 1e-12);
    }
    const auto mech = reduced_mechanism(env, t);
    for (int k = 1; k <= 120; ++k) {
      CHECK(std::abs(reduced_pgf(env, t, k, 120, 0.0)) <= 1e-12);
      CHECK(mech.mean(k - 1) >= 1.0 - 1e-12);
    }
    // k = n: the last step only loses its mass at zero.
    CHECK(mech.mean(119) == doctest::Approx(env.law(120).mean() / t(119)).epsilon(1e-12));
  }
}
