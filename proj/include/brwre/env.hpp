#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "brwre/rng.hpp"

namespace brwre {

enum class LawFamily { linear_fractional, geometric, explicit_support };

/// Largest support accepted for explicit laws.
inline constexpr std::size_t max_explicit_support = std::size_t{1} << 16;

/// A probability law on {0, 1, 2, ...}.
///
/// Three families are shipped:
///   - geometric(p):  F[k] = p (1-p)^k, k >= 0;
///   - linear_fractional(p0, b):  F[0] = p0, F[k] = (1-p0)(1-b) b^(k-1), k >= 1;
///   - explicit: finite mass vector F[0..K].
/// The geometric law is the linear-fractional law with p0 = p, b = 1-p; it is
/// kept as its own tag because it is the family the built-in environments use.
class OffspringLaw {
 public:
  static OffspringLaw geometric(double p);
  static OffspringLaw linear_fractional(double zero_mass, double ratio);
  static OffspringLaw explicit_masses(std::vector<double> masses);
  static OffspringLaw dirac(std::size_t k);

  LawFamily family() const noexcept { return family_; }
  /// F̄ = sum k F[k].
  double mean() const noexcept { return mean_; }
  /// F̃ = F̄^{-2} sum k(k-1) F[k].
  double normalized_factorial_moment() const noexcept { return tilde_; }
  /// κ(F, a) = F̄^{-2} sum_{y >= a} y² F[y].
  double kappa(int a) const;

  double mass(std::size_t k) const;
  double mass_at_zero() const { return mass(0); }

  /// F(s) for s in [0, 1]; throws std::domain_error outside.
  double pgf(double s) const;
  /// log(1 - F(1 - x)) with x = exp(log_x). Stable for tiny x.
  double log_survival_map(double log_x) const;

  std::uint64_t sample(Rng& rng) const;
  /// Sum of `count` independent draws.
  std::uint64_t sample_sum(std::uint64_t count, Rng& rng) const;

  /// Linear-fractional parameters (geometric included); p0 and b.
  double zero_mass() const { return p0_; }
  double ratio() const { return b_; }
  const std::vector<double>& masses() const { return masses_; }
  bool is_linear_fractional() const noexcept { return family_ != LawFamily::explicit_support; }

  /// `family param1 param2 ...`, full round-trip precision.
  std::string to_string() const;
  static OffspringLaw parse(const std::string& line);

  friend bool operator==(const OffspringLaw&, const OffspringLaw&) = default;

 private:
  OffspringLaw() = default;
  void finalize_moments();

  LawFamily family_ = LawFamily::explicit_support;
  double p0_ = 0.0;
  double b_ = 0.0;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
  double mean_ = 0.0;
  double tilde_ = 0.0;
};

struct LawMoments {
  double mean = 0.0;
  double tilde = 0.0;
  double kappa = 0.0;
  bool finite = true;
};

double pgf_eval(const OffspringLaw& law, double s);
LawMoments moments(const OffspringLaw& law, int a);

/// Distribution over offspring laws from which environments are drawn i.i.d.
struct EnvironmentModel {
  enum class Kind {
    two_point,   ///< X = ±scale equiprobable, geometric offspring with mean e^X
    log_normal,  ///< X ~ N(0, scale²), geometric offspring with mean e^X
    fixed        ///< every generation uses `fixed_law`
  };

  Kind kind = Kind::two_point;
  double scale = 0.25;
  std::optional<OffspringLaw> fixed_law;
  int truncation = 1;            ///< a in κ(F, a)
  double moment_exponent = 1.0;  ///< δ in E[(log⁺ κ)^{2+δ}]

  static EnvironmentModel two_point(double c);
  static EnvironmentModel log_normal(double sigma);
  static EnvironmentModel fixed(OffspringLaw law);

  OffspringLaw draw(Rng& rng) const;
  /// Declared σ² = E[X²].
  double declared_variance() const;
  double sigma() const;
  std::string describe() const;
};

/// Geometric law on {0, 1, ...} with mean e^x (p = 1 / (1 + e^x)).
OffspringLaw geometric_with_log_mean(double x);

/// F_1..F_n with X_k = log F̄_k and S_0 = 0, S_k = S_{k-1} + X_k.
class Environment {
 public:
  Environment() = default;
  explicit Environment(std::vector<OffspringLaw> laws);

  std::size_t size() const noexcept { return laws_.size(); }
  /// F_k for 1 <= k <= size(); F_k produces generation k from generation k-1.
  const OffspringLaw& law(std::size_t k) const { return laws_.at(k - 1); }
  const std::vector<OffspringLaw>& laws() const noexcept { return laws_; }
  /// X_1..X_n stored at indices 0..n-1.
  const Eigen::VectorXd& increments() const noexcept { return increments_; }
  /// S_0..S_n.
  const Eigen::VectorXd& walk() const noexcept { return walk_; }
  double walk(std::size_t k) const { return walk_(static_cast<Eigen::Index>(k)); }
  /// η_k = F̃_k, indices 0..n-1.
  Eigen::VectorXd eta() const;

  Environment prefix(std::size_t n) const;

  friend bool operator==(const Environment& a, const Environment& b) { return a.laws_ == b.laws_; }

 private:
  std::vector<OffspringLaw> laws_;
  Eigen::VectorXd increments_;
  Eigen::VectorXd walk_ = Eigen::VectorXd::Zero(1);
};

Environment sample_environment(const EnvironmentModel& model, std::size_t n, Rng& rng);
Environment sample_environment(const EnvironmentModel& model, std::size_t n, std::uint64_t seed);

/// One law per line; blank lines and `#` comments ignored.
void write_environment(std::ostream& out, const Environment& env);
Environment read_environment(std::istream& in);

struct MomentEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

struct CriticalityReport {
  MomentEstimate mean_x;         ///< E[X]
  MomentEstimate second_moment;  ///< σ² = E[X²]
  MomentEstimate kappa_moment;   ///< E[(log⁺ κ(F, a))^{2+δ}]
  std::size_t samples = 0;
  bool enumerated = false;  ///< exact enumeration, standard errors are 0
  bool mean_violation = false;
  bool variance_violation = false;
  bool nonfinite = false;
  bool ok() const { return !mean_violation && !variance_violation && !nonfinite; }
};

CriticalityReport criticality_report(const EnvironmentModel& model, std::size_t n_samples,
                                     std::uint64_t seed);

}  // namespace brwre
