#include "brwre/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace brwre {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void require_probability(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1], got " + format_double(v));
  }
}

// Failures before the first success of a Bernoulli(1 - ratio) sequence.
std::uint64_t geometric_failures(double ratio, Rng& rng) {
  if (ratio <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::floor(std::log(uniform_open(rng)) / std::log(ratio)));
}

}  // namespace

OffspringLaw OffspringLaw::geometric(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("geometric parameter must lie in (0, 1), got " + format_double(p));
  }
  OffspringLaw law;
  law.family_ = LawFamily::geometric;
  law.p0_ = p;
  law.b_ = 1.0 - p;
  law.finalize_moments();
  return law;
}

OffspringLaw OffspringLaw::linear_fractional(double zero_mass, double ratio) {
  require_probability(zero_mass, "linear-fractional zero mass");
  if (zero_mass >= 1.0) throw std::invalid_argument("linear-fractional law must have positive mean");
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("linear-fractional ratio must lie in [0, 1), got " + format_double(ratio));
  }
  OffspringLaw law;
  law.family_ = LawFamily::linear_fractional;
  law.p0_ = zero_mass;
  law.b_ = ratio;
  law.finalize_moments();
  return law;
}

OffspringLaw OffspringLaw::explicit_masses(std::vector<double> masses) {
  while (masses.size() > 1 && masses.back() == 0.0) masses.pop_back();
  if (masses.empty()) throw std::invalid_argument("explicit law needs at least one mass");
  if (masses.size() > max_explicit_support + 1) {
    throw std::invalid_argument("explicit law support exceeds 2^16");
  }
  double total = 0.0;
  for (double m : masses) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw std::invalid_argument("explicit masses must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("explicit masses must sum to 1, got " + format_double(total));
  }
  OffspringLaw law;
  law.family_ = LawFamily::explicit_support;
  law.masses_ = std::move(masses);
  law.cumulative_.resize(law.masses_.size());
  std::partial_sum(law.masses_.begin(), law.masses_.end(), law.cumulative_.begin());
  law.finalize_moments();
  if (!(law.mean_ > 0.0)) throw std::invalid_argument("offspring law must have positive mean");
  return law;
}

OffspringLaw OffspringLaw::dirac(std::size_t k) {
  std::vector<double> masses(k + 1, 0.0);
  masses[k] = 1.0;
  return explicit_masses(std::move(masses));
}

void OffspringLaw::finalize_moments() {
  if (family_ == LawFamily::explicit_support) {
    double first = 0.0;
    double factorial = 0.0;
    for (std::size_t k = 1; k < masses_.size(); ++k) {
      const double kd = static_cast<double>(k);
      first += kd * masses_[k];
      factorial += kd * (kd - 1.0) * masses_[k];
    }
    mean_ = first;
    tilde_ = first > 0.0 ? factorial / (first * first) : 0.0;
  } else {
    mean_ = (1.0 - p0_) / (1.0 - b_);
    tilde_ = 2.0 * b_ / (1.0 - p0_);
  }
}

double OffspringLaw::kappa(int a) const {
  if (a < 1) throw std::invalid_argument("truncation a must be a positive integer");
  if (family_ == LawFamily::explicit_support) {
    double tail = 0.0;
    for (std::size_t y = static_cast<std::size_t>(a); y < masses_.size(); ++y) {
      const double yd = static_cast<double>(y);
      tail += yd * yd * masses_[y];
    }
    return tail / (mean_ * mean_);
  }
  // Y ≥ a for Y geometric on {1, 2, ...} is a - 1 + Y' with Y' an independent
  // copy, which happens with probability b^(a-1).
  const double shift = static_cast<double>(a - 1);
  const double ey = 1.0 / (1.0 - b_);
  const double ey2 = (1.0 + b_) / ((1.0 - b_) * (1.0 - b_));
  const double tail = (1.0 - p0_) * std::pow(b_, shift) * (shift * shift + 2.0 * shift * ey + ey2);
  return tail / (mean_ * mean_);
}

double OffspringLaw::mass(std::size_t k) const {
  if (family_ == LawFamily::explicit_support) return k < masses_.size() ? masses_[k] : 0.0;
  if (k == 0) return p0_;
  return (1.0 - p0_) * (1.0 - b_) * std::pow(b_, static_cast<double>(k - 1));
}

double OffspringLaw::pgf(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("generating function argument outside [0, 1]");
  if (family_ == LawFamily::explicit_support) {
    double acc = 0.0;
    for (auto it = masses_.rbegin(); it != masses_.rend(); ++it) acc = acc * s + *it;
    return acc;
  }
  return p0_ + (1.0 - p0_) * (1.0 - b_) * s / (1.0 - b_ * s);
}

double OffspringLaw::log_survival_map(double log_x) const {
  if (log_x > 0.0) throw std::domain_error("survival map argument outside [0, 1]");
  if (family_ != LawFamily::explicit_support) {
    // 1 - F(1 - x) = (1 - p0) x / (1 - b + b x) for linear-fractional laws.
    return std::log1p(-p0_) + log_x - std::log(1.0 - b_ + b_ * std::exp(log_x));
  }
  const double x = std::exp(log_x);
  if (x == 0.0) return std::log(mean_) + log_x;
  const double log_q = std::log1p(-x);
  double acc = 0.0;
  for (std::size_t k = 1; k < masses_.size(); ++k) {
    if (masses_[k] == 0.0) continue;
    acc += masses_[k] * -std::expm1(static_cast<double>(k) * log_q);
  }
  return std::log(acc);
}

std::uint64_t OffspringLaw::sample(Rng& rng) const {
  switch (family_) {
    case LawFamily::geometric:
      return geometric_failures(b_, rng);
    case LawFamily::linear_fractional:
      if (uniform_open(rng) < p0_) return 0;
      return 1 + geometric_failures(b_, rng);
    case LawFamily::explicit_support: {
      const double u = uniform_open(rng);
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const auto k = static_cast<std::uint64_t>(it - cumulative_.begin());
      return std::min<std::uint64_t>(k, masses_.size() - 1);
    }
  }
  return 0;
}

std::uint64_t OffspringLaw::sample_sum(std::uint64_t count, Rng& rng) const {
  if (count == 0) return 0;
  if (family_ == LawFamily::explicit_support || count < 16) {
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < count; ++i) total += sample(rng);
    return total;
  }
  // Non-zero parents ~ Binomial(count, 1 - p0); each contributes 1 + Geom(1 - b),
  // and a sum of r geometric variables is negative binomial.
  std::uint64_t parents = count;
  if (p0_ > 0.0) parents = std::binomial_distribution<std::uint64_t>(count, 1.0 - p0_)(rng);
  if (parents == 0) return 0;
  if (b_ <= 0.0) return parents;
  return parents + std::negative_binomial_distribution<std::uint64_t>(parents, 1.0 - b_)(rng);
}

std::string OffspringLaw::to_string() const {
  switch (family_) {
    case LawFamily::geometric:
      return "geometric " + format_double(p0_);
    case LawFamily::linear_fractional:
      return "linear-fractional " + format_double(p0_) + " " + format_double(b_);
    case LawFamily::explicit_support: {
      std::string out = "explicit";
      for (double m : masses_) out += " " + format_double(m);
      return out;
    }
  }
  return {};
}

OffspringLaw OffspringLaw::parse(const std::string& line) {
  std::istringstream in(line);
  std::string family;
  in >> family;
  std::vector<double> params;
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size()) throw std::invalid_argument("malformed law parameter '" + token + "'");
    params.push_back(v);
  }
  if (family == "geometric") {
    if (params.size() != 1) throw std::invalid_argument("geometric expects 1 parameter");
    return geometric(params[0]);
  }
  if (family == "linear-fractional") {
    if (params.size() != 2) throw std::invalid_argument("linear-fractional expects 2 parameters");
    return linear_fractional(params[0], params[1]);
  }
  if (family == "explicit") return explicit_masses(std::move(params));
  throw std::invalid_argument("unknown law family '" + family + "'");
}

double pgf_eval(const OffspringLaw& law, double s) { return law.pgf(s); }

LawMoments moments(const OffspringLaw& law, int a) {
  LawMoments m;
  m.mean = law.mean();
  m.tilde = law.normalized_factorial_moment();
  m.kappa = law.kappa(a);
  m.finite = std::isfinite(m.mean) && std::isfinite(m.tilde) && std::isfinite(m.kappa);
  return m;
}

OffspringLaw geometric_with_log_mean(double x) { return OffspringLaw::geometric(1.0 / (1.0 + std::exp(x))); }

EnvironmentModel EnvironmentModel::two_point(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("two-point scale must be positive");
  EnvironmentModel m;
  m.kind = Kind::two_point;
  m.scale = c;
  return m;
}

EnvironmentModel EnvironmentModel::log_normal(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("log-normal sigma must be positive");
  EnvironmentModel m;
  m.kind = Kind::log_normal;
  m.scale = sigma;
  return m;
}

EnvironmentModel EnvironmentModel::fixed(OffspringLaw law) {
  EnvironmentModel m;
  m.kind = Kind::fixed;
  m.scale = 0.0;
  m.fixed_law = std::move(law);
  return m;
}

OffspringLaw EnvironmentModel::draw(Rng& rng) const {
  switch (kind) {
    case Kind::two_point:
      return geometric_with_log_mean((rng() >> 63) != 0 ? scale : -scale);
    case Kind::log_normal:
      return geometric_with_log_mean(scale * standard_normal(rng));
    case Kind::fixed:
      return *fixed_law;
  }
  throw std::logic_error("unreachable environment kind");
}

double EnvironmentModel::declared_variance() const {
  if (kind == Kind::fixed) {
    const double x = std::log(fixed_law->mean());
    return x * x;
  }
  return scale * scale;
}

double EnvironmentModel::sigma() const { return std::sqrt(declared_variance()); }

std::string EnvironmentModel::describe() const {
  switch (kind) {
    case Kind::two_point:
      return "two-point c=" + format_double(scale);
    case Kind::log_normal:
      return "log-normal sigma=" + format_double(scale);
    case Kind::fixed:
      return "fixed " + fixed_law->to_string();
  }
  return {};
}

Environment::Environment(std::vector<OffspringLaw> laws) : laws_(std::move(laws)) {
  const auto n = static_cast<Eigen::Index>(laws_.size());
  increments_.resize(n);
  walk_.resize(n + 1);
  walk_(0) = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    increments_(k) = std::log(laws_[static_cast<std::size_t>(k)].mean());
    walk_(k + 1) = walk_(k) + increments_(k);
  }
}

Eigen::VectorXd Environment::eta() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(laws_.size()));
  for (std::size_t k = 0; k < laws_.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = laws_[k].normalized_factorial_moment();
  }
  return out;
}

Environment Environment::prefix(std::size_t n) const {
  if (n > laws_.size()) throw std::invalid_argument("prefix longer than environment");
  return Environment(std::vector<OffspringLaw>(laws_.begin(), laws_.begin() + static_cast<std::ptrdiff_t>(n)));
}

Environment sample_environment(const EnvironmentModel& model, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("environment length must be at least 1");
  std::vector<OffspringLaw> laws;
  laws.reserve(n);
  for (std::size_t k = 0; k < n; ++k) laws.push_back(model.draw(rng));
  return Environment(std::move(laws));
}

Environment sample_environment(const EnvironmentModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  return sample_environment(model, n, rng);
}

void write_environment(std::ostream& out, const Environment& env) {
  out << "# brwre environment, " << env.size() << " generations\n";
  for (const auto& law : env.laws()) out << law.to_string() << '\n';
}

Environment read_environment(std::istream& in) {
  std::vector<OffspringLaw> laws;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    laws.push_back(OffspringLaw::parse(line.substr(first)));
  }
  return Environment(std::move(laws));
}

namespace {

double log_plus_power(double kappa, double exponent) {
  const double l = std::log(std::max(kappa, 1.0));
  return std::pow(l, exponent);
}

}  // namespace

CriticalityReport criticality_report(const EnvironmentModel& model, std::size_t n_samples,
                                     std::uint64_t seed) {
  if (n_samples < 1000) throw std::invalid_argument("criticality report needs at least 1000 samples");
  CriticalityReport report;
  report.samples = n_samples;
  const double power = 2.0 + model.moment_exponent;

  if (model.kind != EnvironmentModel::Kind::log_normal) {
    // Finite support: enumerate.
    report.enumerated = true;
    std::vector<std::pair<double, OffspringLaw>> atoms;
    if (model.kind == EnvironmentModel::Kind::two_point) {
      atoms.emplace_back(0.5, geometric_with_log_mean(model.scale));
      atoms.emplace_back(0.5, geometric_with_log_mean(-model.scale));
    } else {
      atoms.emplace_back(1.0, *model.fixed_law);
    }
    for (const auto& [w, law] : atoms) {
      const double x = std::log(law.mean());
      report.mean_x.value += w * x;
      report.second_moment.value += w * x * x;
      report.kappa_moment.value += w * log_plus_power(law.kappa(model.truncation), power);
    }
    // Exact cancellation for symmetric atoms.
    if (model.kind == EnvironmentModel::Kind::two_point) report.mean_x.value = 0.0;
    report.mean_violation = std::abs(report.mean_x.value) > 1e-12;
  } else {
    Rng rng = substream(seed, 0);
    double s1 = 0.0, s2 = 0.0, s4 = 0.0, k1 = 0.0, k2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double x = model.scale * standard_normal(rng);
      const double kp = log_plus_power(geometric_with_log_mean(x).kappa(model.truncation), power);
      s1 += x;
      s2 += x * x;
      s4 += x * x * x * x;
      k1 += kp;
      k2 += kp * kp;
    }
    const double n = static_cast<double>(n_samples);
    auto finish = [n](double sum, double sum_sq) {
      const double mean = sum / n;
      const double var = std::max(sum_sq / n - mean * mean, 0.0);
      return MomentEstimate{mean, std::sqrt(var * n / (n - 1.0) / n)};
    };
    report.mean_x = finish(s1, s2);
    report.second_moment = finish(s2, s4);
    report.kappa_moment = finish(k1, k2);
    report.mean_violation = std::abs(report.mean_x.value) > 3.0 * report.mean_x.standard_error;
  }
  report.nonfinite = !std::isfinite(report.mean_x.value) || !std::isfinite(report.second_moment.value) ||
                     !std::isfinite(report.kappa_moment.value);
  report.variance_violation = !(report.second_moment.value > 0.0) || !std::isfinite(report.second_moment.value);
  return report;
}

}  // namespace brwre
