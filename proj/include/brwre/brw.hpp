#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "brwre/env.hpp"
#include "brwre/rng.hpp"

namespace brwre {

inline constexpr std::uint64_t default_population_cap = 10'000'000;

struct SimulationOptions {
  std::uint64_t population_cap = default_population_cap;
  /// Keep parent indices for every generation (needed for reduced counts).
  bool keep_ancestry = false;
  /// Keep positions for every generation (needed for martingale weights).
  bool keep_positions = false;
  /// Stop as soon as some particle reaches this level.
  std::optional<double> stop_above;
};

/// One quenched tree. Generation 0 is the root at the origin.
struct TreeSample {
  int horizon = 0;
  std::vector<std::uint64_t> population;  ///< Z_0..Z_h for the simulated generations
  std::vector<double> generation_max;     ///< M_k; -inf for extinct generations
  double running_max = 0.0;               ///< M = max_k M_k
  std::optional<int> extinction_time;     ///< T, or empty when alive at the horizon
  std::vector<double> frontier;           ///< positions at the horizon (when reached)
  /// parents[k][i]: index in generation k-1 of particle i of generation k (k >= 1).
  std::vector<std::vector<std::uint32_t>> parents;
  /// positions[k][i]: position of particle i of generation k.
  std::vector<std::vector<double>> positions;
  bool overflow = false;
  bool stopped_early = false;

  bool alive_at_horizon() const {
    return !overflow && static_cast<int>(population.size()) == horizon + 1 && population.back() > 0;
  }
  bool has_ancestry() const { return parents.size() == population.size(); }
  bool has_positions() const { return positions.size() == population.size(); }
};

struct ReducedCounts {
  std::vector<std::uint64_t> counts;  ///< Z(k, n), k = 0..n
};

struct TreeSummary {
  std::vector<std::uint64_t> population;
  std::vector<double> generation_max;
  double running_max = 0.0;
  std::optional<int> extinction_time;
};

/// Simulates the branching random walk in a fixed environment up to `horizon`.
/// Generation k is produced from generation k-1 by F_k; children take
/// independent N(0, 1) steps from their parent.
TreeSample simulate_quenched(const Environment& env, int horizon, Rng& rng,
                             const SimulationOptions& options = {});

/// Population sizes only (no positions), using summed offspring draws.
std::vector<std::uint64_t> simulate_population(const Environment& env, int horizon, Rng& rng,
                                               std::uint64_t population_cap = default_population_cap);

/// Population sizes under the annealed law, each F_k drawn from `model` as the
/// generation is produced. Stops after extinction, at `horizon`, or once Z_k
/// exceeds `population_cap` (the last entry is then above the cap).
std::vector<std::uint64_t> simulate_annealed_population(const EnvironmentModel& model, int horizon, Rng& rng,
                                                        std::uint64_t population_cap = default_population_cap);

class RejectionExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConditionedSample {
  Environment environment;
  TreeSample tree;
  std::uint64_t attempts = 0;
};

/// Draws a fresh environment and tree until Z_n > 0. Throws RejectionExhausted
/// after `max_tries` failures.
ConditionedSample conditioned_sample(const EnvironmentModel& model, int horizon, Rng& rng,
                                     std::uint64_t max_tries, const SimulationOptions& options = {});

TreeSummary summarize(const TreeSample& tree);

/// Z(k, n) by a backward sweep over the stored ancestry.
ReducedCounts reduced_counts(const TreeSample& tree, int horizon);

/// Unconditioned lifetime of a tree whose environment is drawn generation by
/// generation from `model`.
struct LifetimeSample {
  double running_max = 0.0;
  int generations = 0;
  bool extinct = false;
  /// The population was pruned and the stop level was never reached, so the
  /// lifetime maximum is only known from below.
  bool overflow = false;
  bool pruned = false;
  bool stopped_early = false;  ///< reached the stop level
  bool censored = false;       ///< alive at the generation cap
};

/// Above `population_cap` particles the generation is pruned to its highest
/// `population_cap` members when a stop level is set (overflow otherwise).
struct LifetimeOptions {
  std::uint64_t population_cap = default_population_cap;
  int max_generations = 100'000;
  std::optional<double> stop_above;
};

LifetimeSample simulate_lifetime(const EnvironmentModel& model, Rng& rng, const LifetimeOptions& options);

/// CSV with columns generation,Z,M_k,Z_reduced (Z_reduced empty when unavailable).
void write_tree_csv(std::ostream& out, const TreeSample& tree, const ReducedCounts* reduced);

}  // namespace brwre
