// One pass/fail line per acceptance criterion. Usage:
//   acceptance <unit_tests binary> [criterion ...]
// With no criterion numbers every criterion runs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "brwre/brw.hpp"
#include "brwre/gfn.hpp"
#include "brwre/mc.hpp"
#include "brwre/meander.hpp"
#include "brwre/spine.hpp"
#include "brwre/stats.hpp"
#include "brwre/varopt.hpp"
#include "oracles.hpp"

using namespace brwre;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

bool check_passed(const ExperimentReport& r, const std::string& prefix, std::string& detail) {
  bool all = true;
  bool any = false;
  for (const auto& c : r.checks) {
    if (c.name.rfind(prefix, 0) != 0) continue;
    any = true;
    all = all && c.passed;
    detail += " [" + c.name + (c.passed ? " ok" : " FAILED") + (c.detail.empty() ? "" : ": " + c.detail) + "]";
  }
  return any && all;
}

std::string invalid_detail(const ExperimentReport& r) {
  std::string out;
  for (const auto& s : r.invalid_reasons) out += " invalid: " + s + ";";
  return out;
}

Outcome closed_form() {
  const auto t = std::chrono::steady_clock::now();
  const auto f = budget_from_function<double>([](double x) { return x * std::log(2.0); }, 2048);
  const double a = solve_a_f(f).value;
  const double dt = seconds_since(t);
  const double err = std::abs(a - std::sqrt(2 * std::log(2.0)));
  return {err <= 5e-3 && dt < 1.0, "A_f = " + fmt(a) + ", error " + fmt(err) + ", " + fmt(dt) + " s"};
}

Outcome step_budget() {
  const auto t = std::chrono::steady_clock::now();
  const auto f = budget_from_function<double>([](double x) { return x >= 0.5 ? 1.0 : 0.0; }, 2048);
  const auto s = solve_a_f(f);
  const double dt = seconds_since(t);
  double shape = 0;
  for (Eigen::Index i = 0; i < s.optimizer.grid.size(); ++i) {
    const double x = s.optimizer.grid(i);
    shape = std::max(shape, std::abs(s.optimizer.values(i) - (x <= 0.5 ? 0.0 : 2 * x - 1)));
  }
  const double err = std::abs(s.value - 1.0);
  return {err <= 5e-3 && shape <= 5e-3 && dt < 1.0,
          "A_f = " + fmt(s.value) + ", max deviation from zero-then-slope-2 path " + fmt(shape) + ", " + fmt(dt) + " s"};
}

Outcome oracle_equivalence() {
  const auto t = std::chrono::steady_clock::now();
  Rng rng(20240917);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0;
  double worst = 0;
  for (int r = 0; r < 50; ++r) {
    Vector<double> v(7);
    v(0) = 0;
    for (int i = 1; i <= 6; ++i) v(i) = v(i - 1) + (u(rng) < 0.3 ? 0.0 : u(rng));
    const BudgetProfile<double> f(uniform_grid<double>(6), v);
    const double a = solve_a_f(f).value;
    const auto b = brute_force_a_f(f, v(6) / 60 + 1e-12);
    const double gap = std::abs(a - b.lower);
    worst = std::max(worst, gap - b.quantization_bound);
    agree += a >= b.lower - 1e-9 && gap <= b.quantization_bound + 2e-2;
  }
  const double dt = seconds_since(t);
  return {agree == 50 && dt < 60.0,
          std::to_string(agree) + "/50 within bracket, worst excess " + fmt(worst) + ", " + fmt(dt) + " s"};
}

Outcome meander_endpoint() {
  const auto t = std::chrono::steady_clock::now();
  Rng rng(20240917);
  std::vector<double> end(200000);
  for (auto& x : end) x = sample_meander(512, rng).values(512);
  const double ks = ks_against_cdf(end, [](double x) { return x <= 0 ? 0.0 : 1 - std::exp(-x * x / 2); });
  const double dt = seconds_since(t);
  return {ks <= 0.01 && dt < 60.0, "KS vs Rayleigh " + fmt(ks) + ", " + fmt(dt) + " s"};
}

Outcome many_to_one() {
  const auto t = std::chrono::steady_clock::now();
  const auto r = run_many_to_one(default_config("many_to_one"));
  const double dt = seconds_since(t);
  std::string detail = "mean Z = " + fmt(r.results["Z_n"]["mean"]) + " vs e^S = " + fmt(r.results["expected_Z_n"]) +
                       ", " + fmt(dt) + " s";
  const bool ok = check_passed(r, "mean Z_n", detail);
  return {ok && r.valid && dt < 60.0, detail + invalid_detail(r)};
}

Outcome martingale() {
  const int n = 10;
  const Environment env = sample_environment(EnvironmentModel::two_point(0.25), n, 20240917);
  const auto tilt = make_tilt([](double x) { return 0.5 * x; }, n, 0.25 * std::sqrt(double(n)));
  SimulationOptions opts;
  opts.keep_positions = true;
  opts.keep_ancestry = true;
  Rng rng(20240917);
  std::vector<double> w(100000);
  for (auto& x : w) x = additive_martingale(simulate_quenched(env, n, rng, opts), env, tilt, n);
  const auto e = mean_estimate(w);
  return {std::abs(e.mean - 1.0) <= 3 * e.standard_error,
          "mean W_10 = " + fmt(e.mean) + " +- " + fmt(e.standard_error)};
}

Outcome spine() {
  const auto law = OffspringLaw::explicit_masses({0.0, 0.5, 0.5});
  Rng rng(20240917);
  const int reps = 100000;
  std::size_t twos = 0;
  const Environment one({law});
  for (int i = 0; i < reps; ++i) twos += sample_under_q(one, zero_tilt(1), 1, rng).tree.population[1] == 2;
  const double freq = double(twos) / reps;
  const double se = std::sqrt(2.0 / 9.0 / reps);
  bool ok = std::abs(freq - 2.0 / 3.0) <= 3 * se;
  std::string detail = "P_Q(Z_1 = 2) = " + fmt(freq) + ";";

  const auto exact = oracle::population_law({{0.0, 0.5, 0.5}, {0.0, 0.5, 0.5}});
  const Environment two({law, law});
  for (std::uint64_t j = 1; j < exact.size(); ++j) {
    Rng r = substream(20240917, j);
    const auto e = importance_estimate([j](const TreeSample& t) { return t.population[2] == j; }, two,
                                       make_tilt([](double x) { return x; }, 2, 1.0), 2, r, 100000);
    const bool hit = std::abs(e.mean - exact[j]) <= 3 * e.standard_error + 1e-15;
    ok = ok && hit;
    detail += " P(Z_2=" + std::to_string(j) + ") " + fmt(e.mean) + " vs " + fmt(exact[j]) + (hit ? "" : " FAILED");
  }
  return {ok, detail};
}

Outcome reduced_profile() {
  const int n = 20;
  const Environment env = sample_environment(EnvironmentModel::two_point(0.25), n, 20240917);
  const auto table = survival_table(env, n);
  const auto profile = reduced_mean_profile(env, table);
  SimulationOptions opts;
  opts.keep_ancestry = true;
  Rng rng(20240917);
  std::vector<std::vector<double>> z(3);
  const int ks[] = {5, 10, 15};
  while (z[0].size() < 100000) {
    const TreeSample t = simulate_quenched(env, n, rng, opts);
    if (!t.alive_at_horizon()) continue;
    const auto c = reduced_counts(t, n).counts;
    for (int i = 0; i < 3; ++i) z[i].push_back(double(c[ks[i]]));
  }
  bool ok = true;
  std::string detail;
  for (int i = 0; i < 3; ++i) {
    const auto e = mean_estimate(z[i]);
    const bool hit = std::abs(e.mean - profile(ks[i])) <= 3 * e.standard_error;
    ok = ok && hit;
    detail += "k=" + std::to_string(ks[i]) + ": " + fmt(e.mean) + " +- " + fmt(e.standard_error) + " vs " +
              fmt(profile(ks[i])) + (hit ? "; " : " FAILED; ");
  }
  return {ok, detail};
}

Outcome agresti() {
  std::size_t cases = 0;
  std::size_t held = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    const auto model = i % 2 == 0 ? EnvironmentModel::two_point(0.25) : EnvironmentModel::log_normal(0.5);
    Rng rng = substream(20240917, i);
    const Environment env = sample_environment(model, 50, rng);
    const auto table = survival_table(env, 50);
    for (int k = 0; k <= 50; ++k) {
      const auto b = agresti_bounds(env, k, 50);
      ++cases;
      held += b.lower <= table.log_p(k) && table.log_p(k) <= b.upper;
    }
  }
  return {held == cases, std::to_string(held) + "/" + std::to_string(cases) + " (environment, k) pairs"};
}

Outcome conditional_limit() {
  const auto t = std::chrono::steady_clock::now();
  const auto r = run_conditional_limit(default_config("conditional_limit"));
  const double dt = seconds_since(t);
  std::string detail = fmt(dt) + " s;";
  const bool trend = check_passed(r, "KS nonincreasing", detail);
  std::string neg;
  check_passed(r, "n=", neg);
  return {trend && r.valid && dt <= 3600.0, detail + neg + invalid_detail(r)};
}

Outcome tail() {
  const auto t = std::chrono::steady_clock::now();
  const auto r = run_tail_exponent(default_config("tail"));
  const double dt = seconds_since(t);
  std::string detail = fmt(dt) + " s, overflow " + fmt(r.overflow_fraction()) + ";";
  if (r.results.contains("slope")) {
    detail += " slope " + fmt(r.results["slope"]) + " +- " + fmt(r.results["slope_standard_error"]) + ", C1_hat " +
              fmt(r.results["C1_hat"]) + ", C2_hat " + fmt(r.results["C2_hat"]) + ";";
  }
  const bool ok = check_passed(r, "slope", detail);
  return {ok && r.valid, detail + invalid_detail(r)};
}

Outcome kozlov() {
  const auto t = std::chrono::steady_clock::now();
  const auto r = run_extinction(default_config("extinction"));
  std::string detail = fmt(seconds_since(t)) + " s;";
  const bool ok = check_passed(r, "ratio", detail);
  return {ok && r.valid, detail + invalid_detail(r)};
}

Outcome invariant_suite(const std::string& unit_tests) {
  const auto t = std::chrono::steady_clock::now();
  const std::string cmd = "\"" + unit_tests + "\" --no-intro --minimal";
  const int status = std::system(cmd.c_str());
  const double dt = seconds_since(t);
  return {status == 0 && dt < 600.0, "exit status " + std::to_string(status) + ", " + fmt(dt) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <unit_tests binary> [criterion ...]\n";
    return 2;
  }
  const std::string unit_tests = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"variational closed form", closed_form},
      {"step budget", step_budget},
      {"oracle equivalence", oracle_equivalence},
      {"meander endpoint", meander_endpoint},
      {"many-to-one", many_to_one},
      {"martingale mean one", martingale},
      {"spine exactness", spine},
      {"reduced mean profile", reduced_profile},
      {"agresti sandwich", agresti},
      {"conditional limit trend", conditional_limit},
      {"tail exponent", tail},
      {"kozlov asymptotic", kozlov},
      {"invariant suite", [&unit_tests] { return invariant_suite(unit_tests); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << "criterion " << number << " " << (o.passed ? "PASS" : "FAIL") << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
