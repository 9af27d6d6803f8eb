#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "brwre/brw.hpp"
#include "brwre/env.hpp"
#include "brwre/stats.hpp"
#include "brwre/varopt.hpp"

namespace brwre {

/// Scaled target path g^{n,a}(i) = sqrt(n a) g(i/n) and its increments
/// λ_i = g^{n,a}(i) - g^{n,a}(i-1).
struct TiltProfile {
  Eigen::VectorXd path;    ///< g(i/n), i = 0..n
  double scale = 0.0;      ///< a_n
  Eigen::VectorXd lambda;  ///< λ_1..λ_n at indices 0..n-1

  int steps() const { return static_cast<int>(lambda.size()); }
};

/// From grid values g(0), g(1/n), ..., g(1); g(0) must be 0.
TiltProfile make_tilt(const Eigen::VectorXd& path, double scale);
TiltProfile make_tilt(const std::function<double(double)>& g, int n, double scale);
TiltProfile zero_tilt(int n);

/// Default tilt: the optimizer g* of A_f for a budget on n cells.
TiltProfile optimizer_tilt(const BudgetProfile<double>& f, double scale);

/// log W_k^n, with W_k^n = sum_{|ν| = k} e^{-S_k} exp(sum_{i<=k} λ_i Δ_i(ν) - λ_i²/2).
/// Per-particle exponents are accumulated in log space.
double log_additive_martingale(const TreeSample& tree, const Environment& env, const TiltProfile& tilt, int k);
double additive_martingale(const TreeSample& tree, const Environment& env, const TiltProfile& tilt, int k);

/// Size-biased masses q[s] = s F[s] / F̄ for an explicit law.
std::vector<double> size_biased_masses(const OffspringLaw& law);
std::uint64_t sample_size_biased(const OffspringLaw& law, Rng& rng);

struct SpineTree {
  TreeSample tree;                   ///< full ancestry and positions
  std::vector<std::uint32_t> spine;  ///< ω_k as an index into generation k
  Eigen::VectorXd spine_positions;
  std::vector<double> spine_uniforms;  ///< the draw that selected each ω_k
  double log_weight = 0.0;             ///< log W_n^n

  /// Importance weight 1 / W_n^n.
  double weight() const;
};

/// Samples the tree under Q_n: the spine reproduces size-biased and its chosen
/// child steps N(λ_k, 1); every other particle follows P_n.
/// Every law must put zero mass at 0.
SpineTree sample_under_q(const Environment& env, const TiltProfile& tilt, int n, Rng& rng,
                         std::uint64_t population_cap = default_population_cap);

using TreeEvent = std::function<bool(const TreeSample&)>;

/// Mean of (1 / W_n^n) 1{event} over `reps` draws from Q_n; unbiased for P_n(event).
Estimate importance_estimate(const TreeEvent& event, const Environment& env, const TiltProfile& tilt, int n,
                             Rng& rng, std::size_t reps);

}  // namespace brwre
