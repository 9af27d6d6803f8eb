#include "brwre/brw.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

namespace brwre {
namespace {

constexpr double minus_infinity = -std::numeric_limits<double>::infinity();

// Advances one generation. Offspring counts are drawn first so the new
// generation is allocated once at its exact size. Returns false when the new
// generation would exceed the cap; `next` is then left empty.
bool advance(const OffspringLaw& law, const std::vector<double>& current, std::vector<double>& next,
             std::vector<std::uint32_t>* parents, std::uint64_t cap, Rng& rng, double& generation_max,
             std::vector<std::uint32_t>& counts) {
  next.clear();
  if (parents != nullptr) parents->clear();
  generation_max = minus_infinity;
  counts.resize(current.size());
  std::uint64_t drawn = 0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const std::uint64_t c = law.sample(rng);
    drawn += c;
    if (drawn > cap) return false;
    counts[i] = static_cast<std::uint32_t>(c);
  }
  next.resize(drawn);
  if (parents != nullptr) parents->resize(drawn);
  std::size_t j = 0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const double origin = current[i];
    for (std::uint32_t c = 0; c < counts[i]; ++c, ++j) {
      const double x = origin + standard_normal(rng);
      next[j] = x;
      generation_max = std::max(generation_max, x);
      if (parents != nullptr) (*parents)[j] = static_cast<std::uint32_t>(i);
    }
  }
  // Conservation: the new generation is exactly the sum of the offspring draws.
  if (j != drawn) throw std::logic_error("offspring conservation violated");
  return true;
}

}  // namespace

TreeSample simulate_quenched(const Environment& env, int horizon, Rng& rng, const SimulationOptions& options) {
  if (horizon < 0 || static_cast<std::size_t>(horizon) > env.size()) {
    throw std::invalid_argument("horizon exceeds environment length");
  }
  if (options.population_cap < 1) throw std::invalid_argument("population cap must be at least 1");
  if (options.population_cap > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("population cap exceeds 32-bit particle indexing");
  }

  TreeSample tree;
  tree.horizon = horizon;
  tree.population.reserve(static_cast<std::size_t>(horizon) + 1);
  tree.generation_max.reserve(static_cast<std::size_t>(horizon) + 1);
  tree.population.push_back(1);
  tree.generation_max.push_back(0.0);
  tree.running_max = 0.0;
  if (options.keep_ancestry) tree.parents.emplace_back();
  if (options.keep_positions) tree.positions.push_back({0.0});

  std::vector<double> current{0.0};
  std::vector<double> next;
  std::vector<std::uint32_t> parent_buffer;
  std::vector<std::uint32_t> counts;

  for (int k = 1; k <= horizon; ++k) {
    if (current.empty()) {
      tree.population.push_back(0);
      tree.generation_max.push_back(minus_infinity);
      if (options.keep_ancestry) tree.parents.emplace_back();
      if (options.keep_positions) tree.positions.emplace_back();
      continue;
    }
    double gmax = minus_infinity;
    auto* parents = options.keep_ancestry ? &parent_buffer : nullptr;
    if (!advance(env.law(static_cast<std::size_t>(k)), current, next, parents, options.population_cap, rng, gmax, counts)) {
      tree.overflow = true;
      break;
    }
    tree.population.push_back(next.size());
    tree.generation_max.push_back(gmax);
    tree.running_max = std::max(tree.running_max, gmax);
    if (options.keep_ancestry) tree.parents.push_back(parent_buffer);
    if (options.keep_positions) tree.positions.push_back(next);
    if (next.empty() && !tree.extinction_time) tree.extinction_time = k;
    std::swap(current, next);
    if (options.stop_above && tree.running_max >= *options.stop_above) {
      tree.stopped_early = true;
      break;
    }
  }
  if (!tree.overflow && !tree.stopped_early) tree.frontier = std::move(current);
  return tree;
}

std::vector<std::uint64_t> simulate_population(const Environment& env, int horizon, Rng& rng,
                                               std::uint64_t population_cap) {
  if (horizon < 0 || static_cast<std::size_t>(horizon) > env.size()) {
    throw std::invalid_argument("horizon exceeds environment length");
  }
  std::vector<std::uint64_t> z{1};
  z.reserve(static_cast<std::size_t>(horizon) + 1);
  for (int k = 1; k <= horizon; ++k) {
    const std::uint64_t next = env.law(static_cast<std::size_t>(k)).sample_sum(z.back(), rng);
    z.push_back(next);
    if (next > population_cap) break;
  }
  return z;
}

std::vector<std::uint64_t> simulate_annealed_population(const EnvironmentModel& model, int horizon, Rng& rng,
                                                        std::uint64_t population_cap) {
  if (horizon < 0) throw std::invalid_argument("horizon must be nonnegative");
  std::vector<std::uint64_t> z{1};
  for (int k = 1; k <= horizon && z.back() > 0; ++k) {
    z.push_back(model.draw(rng).sample_sum(z.back(), rng));
    if (z.back() > population_cap) break;
  }
  return z;
}

ConditionedSample conditioned_sample(const EnvironmentModel& model, int horizon, Rng& rng,
                                     std::uint64_t max_tries, const SimulationOptions& options) {
  if (max_tries < 1) throw std::invalid_argument("max_tries must be at least 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  for (std::uint64_t attempt = 1; attempt <= max_tries; ++attempt) {
    Environment env = sample_environment(model, static_cast<std::size_t>(horizon), rng);
    TreeSample tree = simulate_quenched(env, horizon, rng, options);
    if (tree.overflow || tree.alive_at_horizon()) {
      return ConditionedSample{std::move(env), std::move(tree), attempt};
    }
  }
  throw RejectionExhausted("no surviving tree after " + std::to_string(max_tries) + " attempts");
}

TreeSummary summarize(const TreeSample& tree) {
  TreeSummary s;
  s.population = tree.population;
  s.generation_max = tree.generation_max;
  s.extinction_time = tree.extinction_time;
  double m = minus_infinity;
  for (double v : tree.generation_max) m = std::max(m, v);
  if (m != tree.running_max) throw std::logic_error("running maximum disagrees with generation maxima");
  s.running_max = m;
  return s;
}

ReducedCounts reduced_counts(const TreeSample& tree, int horizon) {
  if (!tree.has_ancestry()) throw std::invalid_argument("reduced counts need stored ancestry");
  if (horizon < 0 || static_cast<std::size_t>(horizon) >= tree.population.size()) {
    throw std::invalid_argument("horizon beyond stored generations");
  }
  const auto n = static_cast<std::size_t>(horizon);
  if (tree.population[n] == 0) throw std::invalid_argument("reduced counts need Z_n > 0");

  ReducedCounts out;
  out.counts.assign(n + 1, 0);
  std::vector<char> marked(tree.population[n], 1);
  out.counts[n] = tree.population[n];
  for (std::size_t k = n; k >= 1; --k) {
    std::vector<char> above(tree.population[k - 1], 0);
    const auto& parents = tree.parents[k];
    for (std::size_t i = 0; i < marked.size(); ++i) {
      if (marked[i]) above[parents[i]] = 1;
    }
    out.counts[k - 1] = static_cast<std::uint64_t>(std::count(above.begin(), above.end(), 1));
    marked = std::move(above);
  }
  return out;
}

LifetimeSample simulate_lifetime(const EnvironmentModel& model, Rng& rng, const LifetimeOptions& options) {
  LifetimeSample out;
  std::vector<double> current{0.0};
  std::vector<double> next;
  std::vector<std::uint32_t> counts;
  const std::uint64_t unbounded = std::numeric_limits<std::uint32_t>::max();
  for (int k = 1; k <= options.max_generations; ++k) {
    const OffspringLaw law = model.draw(rng);
    double gmax = minus_infinity;
    if (!advance(law, current, next, nullptr, unbounded, rng, gmax, counts)) {
      out.overflow = true;
      out.generations = k;
      return out;
    }
    out.generations = k;
    if (next.empty()) {
      out.extinct = !out.pruned;
      out.overflow = out.pruned;
      return out;
    }
    out.running_max = std::max(out.running_max, gmax);
    if (options.stop_above && out.running_max >= *options.stop_above) {
      out.stopped_early = true;
      return out;
    }
    if (next.size() > options.population_cap) {
      if (!options.stop_above) {
        out.overflow = true;
        return out;
      }
      // Keep the highest particles. Their descendants form a sub-walk of the
      // full one, so reaching the stop level with them is exact.
      const auto keep = static_cast<std::ptrdiff_t>(options.population_cap);
      std::nth_element(next.begin(), next.begin() + keep - 1, next.end(), std::greater<>());
      next.resize(options.population_cap);
      out.pruned = true;
    }
    std::swap(current, next);
  }
  out.censored = true;
  out.overflow = out.pruned;
  return out;
}

void write_tree_csv(std::ostream& out, const TreeSample& tree, const ReducedCounts* reduced) {
  out << "generation,Z,M_k,Z_reduced\n";
  for (std::size_t k = 0; k < tree.population.size(); ++k) {
    out << k << ',' << tree.population[k] << ',';
    if (std::isfinite(tree.generation_max[k])) out << tree.generation_max[k];
    out << ',';
    if (reduced != nullptr && k < reduced->counts.size()) out << reduced->counts[k];
    out << '\n';
  }
}

}  // namespace brwre
