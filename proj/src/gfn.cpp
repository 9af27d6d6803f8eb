#include "brwre/gfn.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace brwre {
namespace {

void check_indices(const SurvivalTable& table, int k, int n) {
  if (n != table.horizon) throw std::invalid_argument("horizon does not match survival table");
  if (k < 1 || k > n) throw std::invalid_argument("reduced step index must satisfy 1 <= k <= n");
  if (table.log_p(k - 1) == -std::numeric_limits<double>::infinity()) {
    throw std::domain_error("degenerate environment: P(k-1, n) = 0");
  }
}

}  // namespace

SurvivalTable survival_table(const Environment& env, int n) {
  if (n < 0 || static_cast<std::size_t>(n) > env.size()) {
    throw std::invalid_argument("survival horizon exceeds environment length");
  }
  SurvivalTable t;
  t.horizon = n;
  t.log_p.resize(n + 1);
  t.log_p(n) = 0.0;
  for (int k = n - 1; k >= 0; --k) {
    t.log_p(k) = env.law(static_cast<std::size_t>(k + 1)).log_survival_map(t.log_p(k + 1));
  }
  t.p = t.log_p.array().exp();
  t.degenerate = !(t.p(0) > 0.0);
  return t;
}

double reduced_pgf(const Environment& env, const SurvivalTable& table, int k, int n, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("reduced generating function argument outside [0, 1]");
  check_indices(table, k, n);
  // Algebraically the defining ratio, rewritten through the survival map
  // 1 - F_k(1 - x) at x = P(k,n)(1 - s) so that small probabilities keep
  // full relative precision.
  if (s == 1.0) return 1.0;
  const double log_x = table.log_p(k) + std::log1p(-s);
  const double ratio = std::exp(env.law(static_cast<std::size_t>(k)).log_survival_map(log_x) - table.log_p(k - 1));
  return 1.0 - ratio;
}

ReducedMoments reduced_moments(const Environment& env, const SurvivalTable& table, int k, int n) {
  check_indices(table, k, n);
  const auto& law = env.law(static_cast<std::size_t>(k));
  ReducedMoments m;
  m.mean = std::exp(table.log_p(k) - table.log_p(k - 1) + env.increments()(k - 1));
  m.tilde = table.p(k - 1) * law.normalized_factorial_moment();
  return m;
}

ReducedMechanism reduced_mechanism(const Environment& env, const SurvivalTable& table) {
  ReducedMechanism r;
  r.mean.resize(table.horizon);
  r.tilde.resize(table.horizon);
  for (int k = 1; k <= table.horizon; ++k) {
    const auto m = reduced_moments(env, table, k, table.horizon);
    r.mean(k - 1) = m.mean;
    r.tilde(k - 1) = m.tilde;
  }
  return r;
}

Eigen::VectorXd reduced_mean_profile(const Environment& env, const SurvivalTable& table) {
  const auto n = table.horizon;
  Eigen::VectorXd out(n + 1);
  for (int k = 0; k <= n; ++k) out(k) = std::exp(table.log_p(k) - table.log_p(0) + env.walk(static_cast<std::size_t>(k)));
  out(0) = 1.0;
  return out;
}

LogBounds agresti_bounds(const Environment& env, int k, int n) {
  if (k < 0 || k > n || static_cast<std::size_t>(n) > env.size()) {
    throw std::invalid_argument("agresti bounds need 0 <= k <= n <= environment length");
  }
  const auto& s = env.walk();
  double future_min = s(k);
  double eta_sum = 0.0;
  for (int j = k + 1; j <= n; ++j) {
    future_min = std::min(future_min, s(j));
    eta_sum += env.law(static_cast<std::size_t>(j)).normalized_factorial_moment();
  }
  LogBounds b;
  b.upper = future_min - s(k);
  b.lower = b.upper - std::log1p(eta_sum);
  return b;
}

OffspringLaw reduced_law(const Environment& env, const SurvivalTable& table, int k) {
  check_indices(table, k, table.horizon);
  const auto& law = env.law(static_cast<std::size_t>(k));
  if (!law.is_linear_fractional()) {
    throw std::invalid_argument("closed-form reduced laws exist only for linear-fractional laws");
  }
  const double b = law.ratio();
  const double p = table.p(k);
  return OffspringLaw::linear_fractional(0.0, b * p / (1.0 - b + b * p));
}

TreeSample simulate_reduced(const Environment& env, const SurvivalTable& table, Rng& rng,
                            const SimulationOptions& options) {
  if (table.degenerate) throw std::domain_error("degenerate environment: P(0, n) = 0");
  std::vector<OffspringLaw> laws;
  laws.reserve(static_cast<std::size_t>(table.horizon));
  for (int k = 1; k <= table.horizon; ++k) laws.push_back(reduced_law(env, table, k));
  return simulate_quenched(Environment(std::move(laws)), table.horizon, rng, options);
}

ConditionedSample conditioned_reduced_sample(const EnvironmentModel& model, int horizon, Rng& rng,
                                             std::uint64_t max_tries, const SimulationOptions& options) {
  if (max_tries < 1) throw std::invalid_argument("max_tries must be at least 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  for (std::uint64_t attempt = 1; attempt <= max_tries; ++attempt) {
    Environment env = sample_environment(model, static_cast<std::size_t>(horizon), rng);
    const SurvivalTable table = survival_table(env, horizon);
    if (std::log(uniform_open(rng)) >= table.log_p(0)) continue;
    TreeSample tree = simulate_reduced(env, table, rng, options);
    return ConditionedSample{std::move(env), std::move(tree), attempt};
  }
  throw RejectionExhausted("no accepted environment after " + std::to_string(max_tries) + " attempts");
}

void write_survival_csv(std::ostream& out, const Environment& env, const SurvivalTable& table) {
  out << "k,P,log_agresti_lower,log_agresti_upper\n";
  out.precision(17);
  for (int k = 0; k <= table.horizon; ++k) {
    const auto b = agresti_bounds(env, k, table.horizon);
    out << k << ',' << table.p(k) << ',' << b.lower << ',' << b.upper << '\n';
  }
}

}  // namespace brwre
