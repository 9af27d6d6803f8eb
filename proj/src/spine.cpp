#include "brwre/spine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace brwre {
namespace {

double log_sum_exp(const std::vector<double>& v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace

TiltProfile make_tilt(const Eigen::VectorXd& path, double scale) {
  if (path.size() < 2) throw std::invalid_argument("tilt path needs at least two grid values");
  if (path(0) != 0.0) throw std::invalid_argument("tilt path must start at 0");
  if (!(scale >= 0.0)) throw std::invalid_argument("tilt scale must be nonnegative");
  TiltProfile t;
  t.path = path;
  t.scale = scale;
  const Eigen::Index n = path.size() - 1;
  const double factor = std::sqrt(static_cast<double>(n) * scale);
  t.lambda = factor * (path.tail(n) - path.head(n));
  return t;
}

TiltProfile make_tilt(const std::function<double(double)>& g, int n, double scale) {
  if (n < 1) throw std::invalid_argument("tilt needs n >= 1");
  Eigen::VectorXd path(n + 1);
  for (int i = 0; i <= n; ++i) path(i) = g(static_cast<double>(i) / n);
  return make_tilt(path, scale);
}

TiltProfile zero_tilt(int n) { return make_tilt(Eigen::VectorXd::Zero(n + 1), 0.0); }

TiltProfile optimizer_tilt(const BudgetProfile<double>& f, double scale) {
  return make_tilt(solve_a_f(f).optimizer.values, scale);
}

double log_additive_martingale(const TreeSample& tree, const Environment& env, const TiltProfile& tilt, int k) {
  if (!tree.has_positions() || !tree.has_ancestry()) {
    throw std::invalid_argument("additive martingale needs stored positions and ancestry");
  }
  if (k < 0 || static_cast<std::size_t>(k) >= tree.population.size() || k > tilt.steps()) {
    throw std::invalid_argument("martingale index beyond stored generations");
  }
  std::vector<double> exponent{0.0};
  for (int i = 1; i <= k; ++i) {
    const double lambda = tilt.lambda(i - 1);
    const auto& pos = tree.positions[static_cast<std::size_t>(i)];
    const auto& prev = tree.positions[static_cast<std::size_t>(i) - 1];
    const auto& parents = tree.parents[static_cast<std::size_t>(i)];
    std::vector<double> next(pos.size());
    for (std::size_t j = 0; j < pos.size(); ++j) {
      const auto p = parents[j];
      next[j] = exponent[p] + lambda * (pos[j] - prev[p]) - 0.5 * lambda * lambda;
    }
    exponent = std::move(next);
  }
  return log_sum_exp(exponent) - env.walk(static_cast<std::size_t>(k));
}

double additive_martingale(const TreeSample& tree, const Environment& env, const TiltProfile& tilt, int k) {
  return std::exp(log_additive_martingale(tree, env, tilt, k));
}

std::vector<double> size_biased_masses(const OffspringLaw& law) {
  if (law.family() != LawFamily::explicit_support) {
    throw std::invalid_argument("size-biased mass vector is only materialized for explicit laws");
  }
  const auto& m = law.masses();
  std::vector<double> q(m.size(), 0.0);
  for (std::size_t s = 1; s < m.size(); ++s) q[s] = static_cast<double>(s) * m[s] / law.mean();
  return q;
}

std::uint64_t sample_size_biased(const OffspringLaw& law, Rng& rng) {
  if (law.family() == LawFamily::explicit_support) {
    const auto q = size_biased_masses(law);
    const double u = uniform_open(rng);
    double acc = 0.0;
    for (std::size_t s = 1; s < q.size(); ++s) {
      acc += q[s];
      if (u < acc) return s;
    }
    for (std::size_t s = q.size(); s-- > 1;) {
      if (q[s] > 0.0) return s;
    }
    throw std::logic_error("size-biased law has no mass");
  }
  // q[s] = s (1-b)² b^(s-1): one plus a negative binomial(2, 1-b) count.
  const double b = law.ratio();
  if (b <= 0.0) return 1;
  const double lb = std::log(b);
  const auto g1 = static_cast<std::uint64_t>(std::floor(std::log(uniform_open(rng)) / lb));
  const auto g2 = static_cast<std::uint64_t>(std::floor(std::log(uniform_open(rng)) / lb));
  return 1 + g1 + g2;
}

double SpineTree::weight() const { return std::exp(-log_weight); }

SpineTree sample_under_q(const Environment& env, const TiltProfile& tilt, int n, Rng& rng,
                         std::uint64_t population_cap) {
  if (n < 0 || static_cast<std::size_t>(n) > env.size() || n > tilt.steps()) {
    throw std::invalid_argument("spine horizon exceeds environment or tilt length");
  }
  for (int k = 1; k <= n; ++k) {
    if (env.law(static_cast<std::size_t>(k)).mass_at_zero() != 0.0) {
      throw std::invalid_argument("spine sampler requires laws with no mass at 0");
    }
  }

  SpineTree out;
  TreeSample& tree = out.tree;
  tree.horizon = n;
  tree.population = {1};
  tree.generation_max = {0.0};
  tree.running_max = 0.0;
  tree.parents.emplace_back();
  tree.positions.push_back({0.0});
  out.spine = {0};
  out.spine_positions.resize(n + 1);
  out.spine_positions(0) = 0.0;

  for (int k = 1; k <= n; ++k) {
    const auto& law = env.law(static_cast<std::size_t>(k));
    const double lambda = tilt.lambda(k - 1);
    const auto& current = tree.positions.back();
    std::vector<double> next;
    std::vector<std::uint32_t> parents;
    std::uint32_t new_spine = 0;
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < current.size(); ++i) {
      const bool is_spine = i == out.spine.back();
      const std::uint64_t children = is_spine ? sample_size_biased(law, rng) : law.sample(rng);
      if (next.size() + children > population_cap) {
        throw std::runtime_error("population cap exceeded under the spine measure");
      }
      std::uint64_t chosen = children;
      if (is_spine) {
        const double u = uniform_open(rng);
        out.spine_uniforms.push_back(u);
        chosen = std::min(static_cast<std::uint64_t>(u * static_cast<double>(children)), children - 1);
      }
      for (std::uint64_t c = 0; c < children; ++c) {
        const double step = standard_normal(rng) + (c == chosen ? lambda : 0.0);
        if (c == chosen) new_spine = static_cast<std::uint32_t>(next.size());
        next.push_back(current[i] + step);
        parents.push_back(static_cast<std::uint32_t>(i));
        gmax = std::max(gmax, next.back());
      }
    }
    out.spine.push_back(new_spine);
    out.spine_positions(k) = next[new_spine];
    tree.population.push_back(next.size());
    tree.generation_max.push_back(gmax);
    tree.running_max = std::max(tree.running_max, gmax);
    tree.parents.push_back(std::move(parents));
    tree.positions.push_back(std::move(next));
  }
  tree.frontier = tree.positions.back();
  out.log_weight = log_additive_martingale(tree, env, tilt, n);
  return out;
}

Estimate importance_estimate(const TreeEvent& event, const Environment& env, const TiltProfile& tilt, int n,
                             Rng& rng, std::size_t reps) {
  if (reps == 0) throw std::invalid_argument("importance estimate needs reps > 0");
  std::vector<double> values(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const SpineTree s = sample_under_q(env, tilt, n, rng);
    values[r] = event(s.tree) ? s.weight() : 0.0;
  }
  return mean_estimate(values);
}

}  // namespace brwre
