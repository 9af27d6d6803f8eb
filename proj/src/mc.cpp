#include "brwre/mc.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "brwre/gfn.hpp"
#include "brwre/meander.hpp"

namespace brwre {
namespace {

// Stream tags keep the environment draw, the replications of each horizon and
// the reference batches on disjoint substreams of the same master seed.
constexpr std::uint64_t tag_environment = 0x656e76;
constexpr std::uint64_t tag_reference = 0x726566;

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t tag, std::uint64_t horizon = 0) {
  return mix64(mix64(seed ^ tag) + horizon);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

bool is_linear_fractional_model(const EnvironmentModel& model) {
  return model.kind != EnvironmentModel::Kind::fixed || model.fixed_law->is_linear_fractional();
}

ConditionedSample draw_conditioned(const ExperimentConfig& config, int n, Rng& rng, const SimulationOptions& opts) {
  if (is_linear_fractional_model(config.model)) {
    return conditioned_reduced_sample(config.model, n, rng, config.max_tries, opts);
  }
  return conditioned_sample(config.model, n, rng, config.max_tries, opts);
}

ExperimentReport start_report(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.experiment = config.experiment;
  report.config = config.to_json();
  return report;
}

void gate_overflow(ExperimentReport& report, const ExperimentConfig& config) {
  if (report.overflow_fraction() >= config.max_overflow_fraction) {
    report.invalidate("overflow fraction " + fmt(report.overflow_fraction()) + " >= " +
                      fmt(config.max_overflow_fraction));
  }
}

nlohmann::json estimate_json(const Estimate& e) {
  return {{"mean", e.mean}, {"standard_error", e.standard_error}, {"count", e.count}};
}

std::string model_kind_name(EnvironmentModel::Kind kind) {
  switch (kind) {
    case EnvironmentModel::Kind::two_point:
      return "two_point";
    case EnvironmentModel::Kind::log_normal:
      return "log_normal";
    case EnvironmentModel::Kind::fixed:
      return "fixed";
  }
  return "unknown";
}

// Evaluation points for CDF tables: quantiles of the pooled samples.
std::vector<double> cdf_points(const std::vector<std::vector<double>>& samples, std::size_t count) {
  std::vector<double> pooled;
  for (const auto& s : samples) pooled.insert(pooled.end(), s.begin(), s.end());
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> points;
  if (pooled.empty()) return points;
  for (std::size_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>((static_cast<double>(i) + 0.5) / static_cast<double>(count) *
                                              static_cast<double>(pooled.size()));
    points.push_back(pooled[std::min(idx, pooled.size() - 1)]);
  }
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return points;
}

std::vector<std::string> environment_strings(const Environment& env) {
  std::vector<std::string> out;
  for (const auto& law : env.laws()) out.push_back(law.to_string());
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (replications < 1) throw std::invalid_argument("replications must be positive");
  if (population_cap < 1) throw std::invalid_argument("population cap must be positive");
  if (max_tries < 1) throw std::invalid_argument("max_tries must be positive");
  if (meander_grid < 1) throw std::invalid_argument("meander grid must be positive");
  if (reference_draws < 1) throw std::invalid_argument("reference draws must be positive");
  if (points_per_decade < 1) throw std::invalid_argument("points per decade must be positive");
  if (!(x_min > 0.0) || !(x_max > x_min)) throw std::invalid_argument("tail grid needs 0 < x_min < x_max");
  if (!(max_overflow_fraction > 0.0)) throw std::invalid_argument("overflow threshold must be positive");
  if (model.kind == EnvironmentModel::Kind::fixed && !model.fixed_law) {
    throw std::invalid_argument("fixed model without a law");
  }
  const double sigma = model.sigma();
  for (int n : horizons) {
    if (n < 1) throw std::invalid_argument("horizons must be positive");
    if (sigma * std::sqrt(static_cast<double>(n)) > 12.0) {
      throw std::invalid_argument("horizon " + std::to_string(n) + " beyond feasibility guard sigma sqrt(n) <= 12");
    }
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json model_json = {{"kind", model_kind_name(model.kind)},
                               {"scale", model.scale},
                               {"truncation", model.truncation},
                               {"moment_exponent", model.moment_exponent}};
  if (model.fixed_law) model_json["law"] = model.fixed_law->to_string();
  return {{"experiment", experiment},
          {"seed", seed},
          {"model", model_json},
          {"horizons", horizons},
          {"replications", replications},
          {"population_cap", population_cap},
          {"max_tries", max_tries},
          {"meander_grid", meander_grid},
          {"reference_draws", reference_draws},
          {"level", level},
          {"x_min", x_min},
          {"x_max", x_max},
          {"points_per_decade", points_per_decade},
          {"ks_slack", ks_slack},
          {"ks_budget", ks_budget},
          {"max_overflow_fraction", max_overflow_fraction}};
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"many_to_one", "extinction", "reduced_paths", "conditional_limit",
                                              "tail"};
  return names;
}

ExperimentConfig default_config(std::string_view experiment) {
  ExperimentConfig c;
  c.experiment = std::string(experiment);
  if (experiment == "many_to_one") {
    c.horizons = {10};
    c.replications = 100'000;
  } else if (experiment == "extinction") {
    c.horizons = {64, 128, 256};
    c.replications = 1'000'000;
    c.population_cap = 1'000'000'000'000ULL;
  } else if (experiment == "reduced_paths") {
    c.horizons = {64, 128, 256};
    c.replications = 10'000;
  } else if (experiment == "conditional_limit") {
    c.horizons = {100, 200, 400};
    c.replications = 20'000;
    c.population_cap = 100'000'000;
  } else if (experiment == "tail") {
    c.model = EnvironmentModel::two_point(0.5);
    c.replications = 2'000'000;
    c.population_cap = 50'000;
  } else {
    throw std::invalid_argument("unknown experiment: " + std::string(experiment));
  }
  return c;
}

std::string Table::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
  return out.str();
}

std::string ExperimentReport::summary_line() const {
  std::size_t passed = 0;
  for (const auto& c : checks) passed += c.passed;
  std::string line = experiment + ": " + (valid ? "valid" : "INVALID") + ", checks " + std::to_string(passed) + "/" +
                     std::to_string(checks.size()) + ", replications " + std::to_string(replications) +
                     ", overflow " + fmt(overflow_fraction());
  for (const auto& r : invalid_reasons) line += "; " + r;
  return line;
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json checks_json = nlohmann::json::array();
  for (const auto& c : checks) checks_json.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  nlohmann::json tables_json = nlohmann::json::array();
  for (const auto& t : tables) tables_json.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", t.rows}});
  return {{"experiment", experiment},
          {"config", config},
          {"valid", valid},
          {"invalid_reasons", invalid_reasons},
          {"replications", replications},
          {"overflow", overflow},
          {"overflow_fraction", overflow_fraction()},
          {"results", results},
          {"checks", checks_json},
          {"tables", tables_json}};
}

double coupling_normalization(double sigma, int n) {
  const double nd = static_cast<double>(n);
  const double a_n = sigma * std::sqrt(nd);
  return std::sqrt(nd * a_n);
}

std::vector<double> a_lambda_reference(std::uint64_t draws, int grid, std::uint64_t seed, unsigned threads) {
  auto values = parallel_map(draws, stream_key(seed, tag_reference, static_cast<std::uint64_t>(grid)), threads,
                             [grid](std::uint64_t, Rng& rng) { return sample_a_lambda(rng, grid); });
  std::sort(values.begin(), values.end());
  return values;
}

ExperimentReport run_many_to_one(const ExperimentConfig& config) {
  ExperimentReport report = start_report(config);
  if (config.horizons.size() != 1 || config.horizons[0] > 12) {
    throw std::invalid_argument("many_to_one takes one horizon n <= 12");
  }
  const int n = config.horizons[0];
  const Environment env = sample_environment(config.model, static_cast<std::size_t>(n),
                                             stream_key(config.seed, tag_environment));
  struct Rep {
    double z = 0.0;
    double above = 0.0;
    bool overflow = false;
  };
  SimulationOptions opts;
  opts.population_cap = config.population_cap;
  const auto reps = parallel_map(config.replications, stream_key(config.seed, 1, static_cast<std::uint64_t>(n)),
                                 config.threads, [&](std::uint64_t, Rng& rng) {
                                   const TreeSample tree = simulate_quenched(env, n, rng, opts);
                                   Rep r;
                                   r.overflow = tree.overflow;
                                   r.z = static_cast<double>(tree.frontier.size());
                                   r.above = static_cast<double>(std::count_if(
                                       tree.frontier.begin(), tree.frontier.end(),
                                       [&](double x) { return x >= config.level; }));
                                   return r;
                                 });
  std::vector<double> z;
  std::vector<double> above;
  for (const auto& r : reps) {
    if (r.overflow) {
      ++report.overflow;
      continue;
    }
    z.push_back(r.z);
    above.push_back(r.above);
  }
  report.replications = config.replications;
  const double mean_z = std::exp(env.walk(static_cast<std::size_t>(n)));
  const double mean_above = mean_z * normal_survival(config.level / std::sqrt(static_cast<double>(n)));
  const Estimate ez = mean_estimate(z);
  const Estimate ea = mean_estimate(above);
  report.results = {{"horizon", n},
                    {"environment", environment_strings(env)},
                    {"S_n", env.walk(static_cast<std::size_t>(n))},
                    {"Z_n", estimate_json(ez)},
                    {"expected_Z_n", mean_z},
                    {"count_above_level", estimate_json(ea)},
                    {"expected_count_above_level", mean_above}};
  report.add_check("mean Z_n within 3 SE of exp(S_n)", std::abs(ez.mean - mean_z) <= 3.0 * ez.standard_error,
                   fmt(ez.mean) + " vs " + fmt(mean_z) + " (SE " + fmt(ez.standard_error) + ")");
  report.add_check("mean count above level within 3 SE", std::abs(ea.mean - mean_above) <= 3.0 * ea.standard_error,
                   fmt(ea.mean) + " vs " + fmt(mean_above) + " (SE " + fmt(ea.standard_error) + ")");
  report.tables.push_back({"many_to_one",
                           {"n", "mean_Z", "se_Z", "expected_Z", "mean_count", "se_count", "expected_count"},
                           {{static_cast<double>(n), ez.mean, ez.standard_error, mean_z, ea.mean,
                             ea.standard_error, mean_above}}});
  gate_overflow(report, config);
  return report;
}

ExperimentReport run_extinction(const ExperimentConfig& config) {
  ExperimentReport report = start_report(config);
  if (config.horizons.empty()) throw std::invalid_argument("extinction needs horizons");
  std::vector<int> horizons = config.horizons;
  std::sort(horizons.begin(), horizons.end());
  const int horizon = horizons.back();
  struct Rep {
    int survived = 0;  // last generation with Z_k > 0
    bool overflow = false;
  };
  const auto reps = parallel_map(config.replications, stream_key(config.seed, 2), config.threads,
                                 [&](std::uint64_t, Rng& rng) {
                                   const auto z = simulate_annealed_population(config.model, horizon, rng,
                                                                               config.population_cap);
                                   Rep r;
                                   r.overflow = z.back() > config.population_cap;
                                   r.survived = static_cast<int>(z.size()) - 1 - (z.back() == 0 ? 1 : 0);
                                   return r;
                                 });
  std::vector<std::size_t> alive(horizons.size(), 0);
  std::size_t kept = 0;
  for (const auto& r : reps) {
    if (r.overflow) {
      ++report.overflow;
      continue;
    }
    ++kept;
    for (std::size_t i = 0; i < horizons.size(); ++i) alive[i] += r.survived >= horizons[i];
  }
  report.replications = config.replications;
  Table table{"extinction", {"n", "p", "se_p", "sqrt_n_p", "se_sqrt_n_p"}, {}};
  nlohmann::json per = nlohmann::json::array();
  std::vector<Estimate> p(horizons.size());
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    p[i] = proportion_estimate(alive[i], kept);
    const double rn = std::sqrt(static_cast<double>(horizons[i]));
    table.rows.push_back({static_cast<double>(horizons[i]), p[i].mean, p[i].standard_error, rn * p[i].mean,
                          rn * p[i].standard_error});
    per.push_back({{"n", horizons[i]}, {"p", estimate_json(p[i])}, {"sqrt_n_p", rn * p[i].mean}});
  }
  bool monotone = true;
  for (std::size_t i = 1; i < horizons.size(); ++i) monotone = monotone && p[i].mean <= p[i - 1].mean;
  report.add_check("p_n nonincreasing", monotone);
  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t i = 1; i < horizons.size(); ++i) {
    const double a = std::sqrt(static_cast<double>(horizons[i - 1])) * p[i - 1].mean;
    const double b = std::sqrt(static_cast<double>(horizons[i])) * p[i].mean;
    const double ratio = a > 0.0 ? b / a : std::numeric_limits<double>::quiet_NaN();
    // Delta method, treating the two proportions as independent.
    const double rel = std::hypot(p[i - 1].mean > 0 ? p[i - 1].standard_error / p[i - 1].mean : 0.0,
                                  p[i].mean > 0 ? p[i].standard_error / p[i].mean : 0.0);
    ratios.push_back({{"from", horizons[i - 1]}, {"to", horizons[i]}, {"ratio", ratio}, {"standard_error", ratio * rel}});
    report.add_check("ratio " + std::to_string(horizons[i]) + "/" + std::to_string(horizons[i - 1]) +
                         " in [0.8, 1.25]",
                     ratio >= 0.8 && ratio <= 1.25, fmt(ratio));
  }
  const double rn = std::sqrt(static_cast<double>(horizon));
  const double k_hat = rn * p.back().mean;
  const double k_se = rn * p.back().standard_error;
  report.results = {{"horizons", per},
                    {"ratios", ratios},
                    {"K_hat", {{"value", k_hat}, {"standard_error", k_se}, {"ci95", {k_hat - 1.96 * k_se, k_hat + 1.96 * k_se}}}}};
  report.tables.push_back(std::move(table));
  gate_overflow(report, config);
  return report;
}

ExperimentReport run_reduced_paths(const ExperimentConfig& config) {
  ExperimentReport report = start_report(config);
  if (config.horizons.empty()) throw std::invalid_argument("reduced_paths needs horizons");
  const std::vector<double> times{0.25, 0.5, 0.75, 1.0};
  const std::size_t nt = times.size();
  const int m = config.meander_grid;
  const double sigma = config.model.sigma();
  if (!(sigma > 0.0)) throw std::invalid_argument("reduced_paths needs sigma > 0");

  // Reference Λ_t law from meander draws.
  const auto lambda_rows =
      parallel_map(config.reference_draws, stream_key(config.seed, tag_reference, 1), config.threads,
                   [&](std::uint64_t, Rng& rng) {
                     const auto lambda = future_min(sample_meander(m, rng));
                     std::vector<double> row(nt);
                     for (std::size_t j = 0; j < nt; ++j) {
                       row[j] = lambda.values(static_cast<Eigen::Index>(std::floor(times[j] * m)));
                     }
                     return row;
                   });
  std::vector<std::vector<double>> lambda(nt);
  for (const auto& row : lambda_rows) {
    for (std::size_t j = 0; j < nt; ++j) lambda[j].push_back(row[j]);
  }
  // Λ_t <= Λ_1 pathwise, so the empirical CDFs must be ordered.
  {
    std::vector<double> points = cdf_points({lambda.back()}, 64);
    const auto f1 = empirical_cdf(lambda.back(), points);
    bool ordered = true;
    for (std::size_t j = 0; j + 1 < nt; ++j) {
      const auto ft = empirical_cdf(lambda[j], points);
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double se = std::sqrt(std::max(f1[i] * (1 - f1[i]), 1e-12) / static_cast<double>(lambda[j].size()));
        ordered = ordered && ft[i] >= f1[i] - 3.0 * se;
      }
    }
    report.add_check("Lambda_t dominated by Lambda_1", ordered);
  }

  struct Rep {
    std::vector<double> stats;  // [statistic][time], row-major
    double identity_error = 0.0;
    bool overflow = false;
    std::uint64_t attempts = 0;
  };
  Table ks_table{"reduced_paths_ks", {"n", "t", "ks_mean_profile", "ks_log_reduced", "ks_walk_minimum", "ks_mean_vs_walk"}, {}};
  nlohmann::json per = nlohmann::json::array();
  std::vector<std::vector<double>> ks_by_horizon;
  SimulationOptions opts;
  opts.population_cap = config.population_cap;
  for (int n : config.horizons) {
    const double scale = sigma * std::sqrt(static_cast<double>(n));
    const auto reps = parallel_map(
        config.replications, stream_key(config.seed, 3, static_cast<std::uint64_t>(n)), config.threads,
        [&](std::uint64_t, Rng& rng) {
          const ConditionedSample s = draw_conditioned(config, n, rng, opts);
          Rep r;
          r.attempts = s.attempts;
          r.overflow = s.tree.overflow;
          if (r.overflow) return r;
          const SurvivalTable table = survival_table(s.environment, n);
          const Eigen::VectorXd profile = reduced_mean_profile(s.environment, table);
          const auto walk = s.environment.walk();
          r.stats.resize(3 * nt);
          for (std::size_t j = 0; j < nt; ++j) {
            const auto k = static_cast<std::size_t>(std::floor(times[j] * n));
            const double future = walk.tail(walk.size() - static_cast<Eigen::Index>(k)).minCoeff();
            r.stats[j] = std::log(profile(static_cast<Eigen::Index>(k))) / scale;
            r.stats[nt + j] = std::log(static_cast<double>(s.tree.population[k])) / scale;
            r.stats[2 * nt + j] = future / scale;
          }
          // At t = 1 the mean profile and the walk differ by -log P(0,n) exactly.
          r.identity_error = std::abs(r.stats[nt - 1] - r.stats[3 * nt - 1] + table.log_p(0) / scale);
          return r;
        });
    std::vector<std::vector<double>> stats(3 * nt);
    std::uint64_t overflow = 0;
    double attempts = 0;
    double identity_error = 0.0;
    for (const auto& r : reps) {
      attempts += static_cast<double>(r.attempts);
      if (r.overflow) {
        ++overflow;
        continue;
      }
      identity_error = std::max(identity_error, r.identity_error);
      for (std::size_t c = 0; c < 3 * nt; ++c) stats[c].push_back(r.stats[c]);
    }
    report.add_check("n=" + std::to_string(n) + " t=1 identity mean profile = walk - log P(0,n)",
                     identity_error <= 1e-9, fmt(identity_error));
    report.overflow += overflow;
    report.replications += config.replications;
    std::vector<double> ks(3 * nt);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t j = 0; j < nt; ++j) {
      for (std::size_t s = 0; s < 3; ++s) ks[s * nt + j] = ks_two_sample(stats[s * nt + j], lambda[j]);
      const double ks_mv = ks_two_sample(stats[j], stats[2 * nt + j]);
      ks_table.rows.push_back({static_cast<double>(n), times[j], ks[j], ks[nt + j], ks[2 * nt + j], ks_mv});
      rows.push_back({{"t", times[j]},
                      {"ks_mean_profile", ks[j]},
                      {"ks_log_reduced", ks[nt + j]},
                      {"ks_walk_minimum", ks[2 * nt + j]},
                      {"ks_mean_vs_walk", ks_mv}});
      if (j + 1 == nt) {
        report.add_check("n=" + std::to_string(n) + " t=1 mean profile vs walk KS within budget",
                         ks_mv <= config.ks_budget, fmt(ks_mv));
      }
    }
    per.push_back({{"n", n},
                   {"accepted", stats[0].size()},
                   {"mean_attempts", attempts / static_cast<double>(config.replications)},
                   {"ks", rows}});
    ks_by_horizon.push_back(std::move(ks));
  }
  if (ks_by_horizon.size() >= 2) {
    const std::vector<std::string> names{"mean profile", "log reduced", "walk minimum"};
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t j = 0; j < nt; ++j) {
        const double first = ks_by_horizon.front()[s * nt + j];
        const double last = ks_by_horizon.back()[s * nt + j];
        report.add_check("KS trend " + names[s] + " t=" + fmt(times[j]), last <= first + config.ks_slack,
                         fmt(first) + " -> " + fmt(last));
      }
    }
  }
  report.results = {{"horizons", per}};
  report.tables.push_back(std::move(ks_table));
  gate_overflow(report, config);
  return report;
}

ExperimentReport run_conditional_limit(const ExperimentConfig& config) {
  ExperimentReport report = start_report(config);
  if (config.horizons.empty()) throw std::invalid_argument("conditional_limit needs horizons");
  const double sigma = config.model.sigma();
  if (!(sigma > 0.0)) throw std::invalid_argument("conditional_limit needs sigma > 0");

  bool identity = true;
  for (int n : config.horizons) {
    const double direct = std::sqrt(sigma) * std::pow(static_cast<double>(n), 0.75);
    identity = identity && std::abs(coupling_normalization(sigma, n) - direct) <= 1e-12 * direct;
  }
  if (!identity) throw std::logic_error("normalization identity sqrt(n a_n) = sqrt(sigma) n^{3/4} failed");
  report.add_check("normalization sqrt(n a_n) = sqrt(sigma) n^(3/4)", identity);

  const std::vector<double> reference =
      a_lambda_reference(config.reference_draws, config.meander_grid, config.seed, config.threads);

  struct Rep {
    double value = 0.0;
    bool overflow = false;
  };
  SimulationOptions opts;
  opts.population_cap = config.population_cap;
  std::vector<std::vector<double>> samples;
  std::vector<double> ks;
  nlohmann::json per = nlohmann::json::array();
  for (int n : config.horizons) {
    const double norm = coupling_normalization(sigma, n);
    const auto reps = parallel_map(config.replications, stream_key(config.seed, 4, static_cast<std::uint64_t>(n)),
                                   config.threads, [&](std::uint64_t, Rng& rng) {
                                     const ConditionedSample s = draw_conditioned(config, n, rng, opts);
                                     Rep r;
                                     r.overflow = s.tree.overflow;
                                     if (!r.overflow) r.value = s.tree.generation_max.back() / norm;
                                     return r;
                                   });
    std::vector<double> values;
    std::uint64_t overflow = 0;
    for (const auto& r : reps) {
      if (r.overflow) {
        ++overflow;
      } else {
        values.push_back(r.value);
      }
    }
    report.overflow += overflow;
    report.replications += config.replications;
    const auto negative = static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v < 0; }));
    const double negative_fraction = values.empty() ? 0.0 : static_cast<double>(negative) / static_cast<double>(values.size());
    const double d = ks_two_sample(values, reference);
    report.add_check("n=" + std::to_string(n) + " negative mass < 1%", negative_fraction < 0.01, fmt(negative_fraction));
    per.push_back({{"n", n},
                   {"normalization", norm},
                   {"accepted", values.size()},
                   {"overflow", overflow},
                   {"ks", d},
                   {"negative_fraction", negative_fraction},
                   {"mean", mean_estimate(values).mean}});
    ks.push_back(d);
    samples.push_back(std::move(values));
  }
  for (std::size_t i = 1; i < ks.size(); ++i) {
    report.add_check("KS nonincreasing " + std::to_string(config.horizons[i - 1]) + " -> " +
                         std::to_string(config.horizons[i]),
                     ks[i] <= ks[i - 1] + config.ks_slack, fmt(ks[i - 1]) + " -> " + fmt(ks[i]));
  }
  const double ref_mean = mean_estimate(reference).mean;
  report.results = {{"horizons", per},
                    {"reference", {{"draws", reference.size()}, {"grid", config.meander_grid}, {"mean", ref_mean}}}};

  std::vector<std::vector<double>> all = samples;
  all.push_back(reference);
  const std::vector<double> points = cdf_points(all, 200);
  Table cdf{"conditional_limit_cdf", {"x"}, {}};
  for (int n : config.horizons) cdf.columns.push_back("cdf_n" + std::to_string(n));
  cdf.columns.push_back("cdf_a_lambda");
  std::vector<std::vector<double>> columns;
  for (const auto& s : all) columns.push_back(empirical_cdf(s, points));
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<double> row{points[i]};
    for (const auto& c : columns) row.push_back(c[i]);
    cdf.rows.push_back(std::move(row));
  }
  report.tables.push_back(std::move(cdf));
  Table ks_table{"conditional_limit_ks", {"n", "ks"}, {}};
  for (std::size_t i = 0; i < ks.size(); ++i) ks_table.rows.push_back({static_cast<double>(config.horizons[i]), ks[i]});
  report.tables.push_back(std::move(ks_table));
  gate_overflow(report, config);
  return report;
}

ExperimentReport run_tail_exponent(const ExperimentConfig& config) {
  ExperimentReport report = start_report(config);
  if (config.replications < 1'000'000) {
    report.invalidate("tail exponent needs at least 1e6 replications");
  }
  std::vector<double> grid;
  for (int j = 0;; ++j) {
    const double x = config.x_min * std::pow(10.0, static_cast<double>(j) / config.points_per_decade);
    if (x > config.x_max * (1 + 1e-12)) break;
    grid.push_back(x);
  }
  struct Rep {
    double running_max = 0.0;
    bool dropped = false;
  };
  LifetimeOptions opts;
  opts.population_cap = config.population_cap;
  opts.stop_above = config.x_max;
  const auto reps = parallel_map(config.replications, stream_key(config.seed, 5), config.threads,
                                 [&](std::uint64_t, Rng& rng) {
                                   const LifetimeSample s = simulate_lifetime(config.model, rng, opts);
                                   return Rep{s.running_max, s.overflow || s.censored};
                                 });
  std::vector<std::size_t> hits(grid.size(), 0);
  std::size_t kept = 0;
  for (const auto& r : reps) {
    if (r.dropped) {
      ++report.overflow;
      continue;
    }
    ++kept;
    for (std::size_t j = 0; j < grid.size() && r.running_max > grid[j]; ++j) ++hits[j];
  }
  report.replications = config.replications;

  std::vector<Estimate> p;
  for (auto h : hits) p.push_back(proportion_estimate(h, kept));
  bool monotone = true;
  for (std::size_t j = 1; j < p.size(); ++j) monotone = monotone && p[j].mean <= p[j - 1].mean;
  report.add_check("p(x) nonincreasing", monotone);

  // Widest run of consecutive grid points with p in [1e-4, 1e-1].
  std::size_t best_begin = 0;
  std::size_t best_end = 0;
  for (std::size_t j = 0; j < p.size();) {
    if (p[j].mean < 1e-4 || p[j].mean > 1e-1) {
      ++j;
      continue;
    }
    std::size_t e = j;
    while (e < p.size() && p[e].mean >= 1e-4 && p[e].mean <= 1e-1) ++e;
    if (e - j > best_end - best_begin) {
      best_begin = j;
      best_end = e;
    }
    j = e;
  }
  const std::size_t usable = best_end - best_begin;
  const bool spans_decade = usable >= 2 && grid[best_end - 1] >= 10.0 * grid[best_begin] * (1 - 1e-9);
  if (usable < 5) report.invalidate("fewer than 5 usable grid points");
  if (!spans_decade) report.invalidate("usable window spans less than a decade");

  Table table{"tail", {"x", "p", "se_p", "x23_p", "in_window"}, {}};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    table.rows.push_back({grid[j], p[j].mean, p[j].standard_error, std::pow(grid[j], 2.0 / 3.0) * p[j].mean,
                          j >= best_begin && j < best_end ? 1.0 : 0.0});
  }
  report.tables.push_back(std::move(table));

  if (usable >= 2) {
    std::vector<double> lx;
    std::vector<double> lp;
    double c1 = std::numeric_limits<double>::infinity();
    double c2 = 0.0;
    for (std::size_t j = best_begin; j < best_end; ++j) {
      lx.push_back(std::log(grid[j]));
      lp.push_back(std::log(p[j].mean));
      const double c = std::pow(grid[j], 2.0 / 3.0) * p[j].mean;
      c1 = std::min(c1, c);
      c2 = std::max(c2, c);
    }
    const LinearFit fit = least_squares(lx, lp);
    report.results = {{"slope", fit.slope},
                      {"slope_standard_error", fit.slope_standard_error},
                      {"slope_ci95", {fit.slope - 1.96 * fit.slope_standard_error, fit.slope + 1.96 * fit.slope_standard_error}},
                      {"target", -2.0 / 3.0},
                      {"window", {grid[best_begin], grid[best_end - 1]}},
                      {"usable_points", usable},
                      {"C1_hat", c1},
                      {"C2_hat", c2}};
    report.add_check("slope in [-1.0, -0.4]", fit.slope >= -1.0 && fit.slope <= -0.4, fmt(fit.slope));
  } else {
    report.results = {{"usable_points", usable}};
  }
  gate_overflow(report, config);
  return report;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.experiment == "many_to_one") return run_many_to_one(config);
  if (config.experiment == "extinction") return run_extinction(config);
  if (config.experiment == "reduced_paths") return run_reduced_paths(config);
  if (config.experiment == "conditional_limit") return run_conditional_limit(config);
  if (config.experiment == "tail") return run_tail_exponent(config);
  throw std::invalid_argument("unknown experiment: " + config.experiment);
}

}  // namespace brwre
