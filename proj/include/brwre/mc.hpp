#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "brwre/brw.hpp"
#include "brwre/env.hpp"
#include "brwre/stats.hpp"

namespace brwre {

/// Parameters of one experiment. Every experiment is a pure function of this
/// struct (the worker count only changes wall time).
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 20240917;
  EnvironmentModel model = EnvironmentModel::two_point(0.25);
  std::vector<int> horizons;
  std::uint64_t replications = 0;
  std::uint64_t population_cap = default_population_cap;
  std::uint64_t max_tries = 100'000'000;
  int meander_grid = 512;
  std::uint64_t reference_draws = 200'000;
  /// Counting level c for the many-to-one frontier statistic.
  double level = 0.0;
  /// Tail grid x_j = x_min 10^{j / points_per_decade} up to x_max.
  double x_min = 1.0;
  double x_max = 63.1;
  int points_per_decade = 10;
  double ks_slack = 0.02;
  /// Allowed KS distance between the t = 1 mean-profile and walk statistics.
  double ks_budget = 0.3;
  double max_overflow_fraction = 0.01;
  unsigned threads = 0;  ///< 0: hardware concurrency

  /// Throws std::invalid_argument on nonpositive counts or infeasible horizons.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Shipped parameterization of a named experiment.
ExperimentConfig default_config(std::string_view experiment);

/// Names accepted by `run_experiment`.
const std::vector<std::string>& experiment_names();

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::json config;
  bool valid = true;
  std::vector<std::string> invalid_reasons;
  std::uint64_t replications = 0;
  std::uint64_t overflow = 0;
  nlohmann::json results;
  std::vector<Table> tables;
  std::vector<Check> checks;

  double overflow_fraction() const {
    return replications == 0 ? 0.0 : static_cast<double>(overflow) / static_cast<double>(replications);
  }
  bool checks_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
  void invalidate(std::string reason) {
    valid = false;
    invalid_reasons.push_back(std::move(reason));
  }
  void add_check(std::string name, bool passed, std::string detail = {}) {
    checks.push_back({std::move(name), passed, std::move(detail)});
  }
  /// One line: experiment name, validity, checks passed.
  std::string summary_line() const;
  nlohmann::json to_json() const;
};

/// Evaluates f(i, rng_i) for i = 0..count-1 with rng_i = substream(seed, i),
/// spread over `threads` workers. Results are stored by index, so reducing
/// them in order gives numbers independent of scheduling.
template <typename F>
auto parallel_map(std::uint64_t count, std::uint64_t seed, unsigned threads, F&& f)
    -> std::vector<std::invoke_result_t<F&, std::uint64_t, Rng&>> {
  using R = std::invoke_result_t<F&, std::uint64_t, Rng&>;
  std::vector<R> out(count);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(count, 1)));
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    constexpr std::uint64_t chunk = 64;
    for (;;) {
      const std::uint64_t begin = next.fetch_add(chunk);
      if (begin >= count) return;
      const std::uint64_t end = std::min(count, begin + chunk);
      try {
        for (std::uint64_t i = begin; i < end; ++i) {
          Rng rng = substream(seed, i);
          out[i] = f(i, rng);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Z_n and #{frontier >= level} against e^{S_n} and e^{S_n} P(N(0,n) >= level)
/// in one environment drawn from the model (horizons[0] <= 12).
ExperimentReport run_many_to_one(const ExperimentConfig& config);

/// √n P(Z_n > 0) over the horizons, from annealed population runs.
ExperimentReport run_extinction(const ExperimentConfig& config);

/// Reduced-process statistics at t in {1/4, 1/2, 3/4, 1} against Λ_t.
ExperimentReport run_reduced_paths(const ExperimentConfig& config);

/// M_n / (√σ n^{3/4}) given survival against A_Λ.
ExperimentReport run_conditional_limit(const ExperimentConfig& config);

/// P(M > x) over the lifetime of unconditioned trees.
ExperimentReport run_tail_exponent(const ExperimentConfig& config);

ExperimentReport run_experiment(const ExperimentConfig& config);

/// √(n a_n) with a_n = σ √n.
double coupling_normalization(double sigma, int n);

/// A_Λ reference batch, sorted.
std::vector<double> a_lambda_reference(std::uint64_t draws, int grid, std::uint64_t seed, unsigned threads);

}  // namespace brwre
