#pragma once

#include <iosfwd>

#include <Eigen/Core>

#include "brwre/brw.hpp"
#include "brwre/env.hpp"

namespace brwre {

/// P_ξ(k, n) = 1 - F_{k+1} ∘ ... ∘ F_n (0) for 0 <= k <= n.
///
/// The recursion runs on log P directly through each law's survival map
/// x ↦ 1 - F(1 - x), so no cancellation happens when P is small and
/// probabilities below the double range stay representable as logs.
struct SurvivalTable {
  int horizon = 0;
  Eigen::VectorXd log_p;  ///< log P_ξ(k, n)
  Eigen::VectorXd p;      ///< P_ξ(k, n); 0 where the log underflows
  bool degenerate = false;

  double operator()(int k) const { return p(k); }
};

SurvivalTable survival_table(const Environment& env, int n);

/// F^{r,n}_k(s) = [F_k(1 - P(k,n) + s P(k,n)) - 1 + P(k-1,n)] / P(k-1,n).
double reduced_pgf(const Environment& env, const SurvivalTable& table, int k, int n, double s);

struct ReducedMoments {
  double mean = 0.0;   ///< F̄^{r,n}_k = P(k,n)/P(k-1,n) e^{X_k}
  double tilde = 0.0;  ///< F̃^{r,n}_k = P(k-1,n) η_k
};

ReducedMoments reduced_moments(const Environment& env, const SurvivalTable& table, int k, int n);

/// Per-step reduced means and normalized second factorial moments, k = 1..n
/// stored at indices 0..n-1.
struct ReducedMechanism {
  Eigen::VectorXd mean;
  Eigen::VectorXd tilde;
};

ReducedMechanism reduced_mechanism(const Environment& env, const SurvivalTable& table);

/// E_ξ[Z(k,n) | Z_n > 0] = P(k,n)/P(0,n) e^{S_k}, k = 0..n.
Eigen::VectorXd reduced_mean_profile(const Environment& env, const SurvivalTable& table);

struct LogBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Sandwich on log P_ξ(k, n): upper = L(k,n) - S_k with L(k,n) = min_{k<=j<=n} S_j,
/// lower = upper - log(1 + sum_{j=k+1}^n η_j).
LogBounds agresti_bounds(const Environment& env, int k, int n);

/// Reduced law F^{r,n}_k for a linear-fractional F_k: geometric on {1, 2, ...}
/// with ratio b P(k,n) / (1 - b + b P(k,n)). Throws for explicit laws.
OffspringLaw reduced_law(const Environment& env, const SurvivalTable& table, int k);

/// Samples the reduced tree {Z(k,n)} with positions given Z_n > 0, using the
/// closed-form reduced laws. The generation-n particles are exactly those of
/// the conditioned full tree, so `generation_max[n]` is distributed as M_n
/// given survival.
TreeSample simulate_reduced(const Environment& env, const SurvivalTable& table, Rng& rng,
                            const SimulationOptions& options = {});

/// Annealed conditioning for linear-fractional models: a fresh environment is
/// accepted with probability P_ξ(0,n) and the tree is then drawn from the
/// reduced mechanism. Same joint law as `conditioned_sample`.
ConditionedSample conditioned_reduced_sample(const EnvironmentModel& model, int horizon, Rng& rng,
                                             std::uint64_t max_tries, const SimulationOptions& options = {});

/// CSV with columns k,P,log_agresti_lower,log_agresti_upper.
void write_survival_csv(std::ostream& out, const Environment& env, const SurvivalTable& table);

}  // namespace brwre
