#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "brwre/brw.hpp"
#include "brwre/env.hpp"
#include "brwre/gfn.hpp"
#include "brwre/io.hpp"
#include "brwre/mc.hpp"
#include "brwre/meander.hpp"
#include "brwre/varopt.hpp"

namespace fs = std::filesystem;
using namespace brwre;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_invalid = 3;

// Sections named after a subcommand bind to that subcommand's flags; every
// other section is a module prefix, so `[mc] replications = 5` sets
// `--mc.replications`.
class ModuleIni : public CLI::ConfigINI {
 public:
  explicit ModuleIni(std::set<std::string> subcommands) : subcommands_(std::move(subcommands)) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    std::vector<CLI::ConfigItem> out;
    for (auto& item : items) {
      if (item.parents.empty() || subcommands_.count(item.parents.front()) > 0) {
        out.push_back(std::move(item));
        continue;
      }
      if (item.name == "++" || item.name == "--") continue;
      std::string name;
      for (const auto& p : item.parents) name += p + ".";
      item.name = name + item.name;
      item.parents.clear();
      out.push_back(std::move(item));
    }
    return out;
  }

 private:
  std::set<std::string> subcommands_;
};

struct ModelFlags {
  std::string kind = "two_point";
  double scale = 0.25;
  std::string law = "geometric 0.5";
  int truncation = 1;
  double moment_exponent = 1.0;

  EnvironmentModel build() const {
    EnvironmentModel m;
    if (kind == "two_point") {
      m = EnvironmentModel::two_point(scale);
    } else if (kind == "log_normal") {
      m = EnvironmentModel::log_normal(scale);
    } else if (kind == "fixed") {
      m = EnvironmentModel::fixed(OffspringLaw::parse(law));
    } else {
      throw CLI::ValidationError("env.model", "unknown model " + kind);
    }
    m.truncation = truncation;
    m.moment_exponent = moment_exponent;
    return m;
  }
};

struct McFlags {
  std::uint64_t replications = 0;
  std::vector<int> horizons;
  std::uint64_t population_cap = 0;
  std::uint64_t max_tries = 0;
  int meander_grid = 0;
  std::uint64_t reference_draws = 0;
  std::optional<double> level;
  std::optional<double> x_min;
  std::optional<double> x_max;
  int points_per_decade = 0;
  std::optional<double> ks_slack;
  std::optional<double> ks_budget;
  std::optional<double> max_overflow;
};

std::string ini_value(const CLI::Option* opt) {
  std::vector<std::string> values = opt->results();
  if (values.empty()) {
    const std::string d = opt->get_default_str();
    if (d.empty()) return {};
    values.push_back(d);
  }
  auto quote = [](const std::string& v) {
    return v.find_first_of(" ,\"'") == std::string::npos ? v : '"' + v + '"';
  };
  if (opt->get_items_expected_max() > 1) {
    std::string out = "[";
    for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + quote(values[i]);
    return out + "]";
  }
  return quote(values.back());
}

// Every flag with its effective value, as an INI file that `--config` reads
// back: plain flags first, then one section per module prefix, then the
// active subcommand's flags.
std::string resolved_config(const CLI::App& app, const CLI::App* active) {
  std::string top;
  std::map<std::string, std::string> sections;
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (opt->get_positional() || name == "help" || name == "config") continue;
    const std::string value = ini_value(opt);
    if (value.empty()) continue;
    const auto dot = name.find('.');
    if (dot == std::string::npos) {
      top += name + " = " + value + "\n";
    } else {
      sections[name.substr(0, dot)] += name.substr(dot + 1) + " = " + value + "\n";
    }
  }
  std::string out = top;
  for (const auto& [section, body] : sections) out += "[" + section + "]\n" + body;
  if (active != nullptr && active->get_parent() == &app) {
    std::string body;
    for (const CLI::Option* opt : active->get_options()) {
      const std::string name = opt->get_single_name();
      if (opt->get_positional() || name == "help") continue;
      const std::string value = ini_value(opt);
      if (!value.empty()) body += name + " = " + value + "\n";
    }
    if (!body.empty()) out += "[" + active->get_name() + "]\n" + body;
  }
  return out;
}

// The resolved config always carries the master seed.
std::string header_block(const std::string& command, const std::string& resolved) {
  return comment_block("brwre " + command + "\n" + resolved);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, text);
  std::cout << "wrote " << path.string() << "\n";
}

std::string format_value(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

int print_report(const nlohmann::json& report) {
  std::size_t passed = 0;
  for (const auto& c : report["checks"]) passed += c["passed"].get<bool>();
  const bool valid = report["valid"].get<bool>();
  std::cout << report["experiment"].get<std::string>() << ": " << (valid ? "valid" : "INVALID") << ", checks "
            << passed << "/" << report["checks"].size() << ", overflow fraction "
            << format_value(report["overflow_fraction"].get<double>()) << "\n";
  for (const auto& r : report["invalid_reasons"]) std::cout << "  invalid: " << r.get<std::string>() << "\n";
  for (const auto& c : report["checks"]) {
    std::cout << "  " << (c["passed"].get<bool>() ? "pass" : "FAIL") << "  " << c["name"].get<std::string>();
    const auto detail = c["detail"].get<std::string>();
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
  }
  return valid ? 0 : exit_invalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching random walk in random environment: simulation, reduced processes, variational solver "
               "and Monte Carlo experiments."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "INI config; sections are module names or subcommands, flags override it");

  std::uint64_t seed = 20240917;
  std::string output_dir = ".";
  unsigned threads = 0;
  ModelFlags model_flags;
  McFlags mc;
  std::uint64_t cap = default_population_cap;

  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("-o,--output", output_dir, "output directory")->envname("BRWRE_OUTPUT_DIR")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for experiments (0: all cores)")->capture_default_str();
  app.add_option("--env.model", model_flags.kind, "two_point | log_normal | fixed")
      ->check(CLI::IsMember({"two_point", "log_normal", "fixed"}))
      ->capture_default_str();
  app.add_option("--env.scale", model_flags.scale, "c for two_point, sigma for log_normal")->capture_default_str();
  app.add_option("--env.law", model_flags.law, "offspring law for the fixed model, e.g. 'geometric 0.5'")
      ->capture_default_str();
  app.add_option("--env.truncation", model_flags.truncation, "a in kappa(F, a)")->capture_default_str();
  app.add_option("--env.moment-exponent", model_flags.moment_exponent, "delta in the kappa moment condition")
      ->capture_default_str();
  app.add_option("--brw.cap", cap, "population cap for simulate/reduced")->capture_default_str();
  app.add_option("--mc.replications", mc.replications, "replications (0: experiment default)");
  app.add_option("--mc.horizons", mc.horizons, "horizons (empty: experiment default)");
  app.add_option("--mc.cap", mc.population_cap, "population cap (0: experiment default)");
  app.add_option("--mc.max-tries", mc.max_tries, "rejection attempts per conditioned sample (0: default)");
  app.add_option("--mc.meander-grid", mc.meander_grid, "meander grid for reference batches (0: default)");
  app.add_option("--mc.reference-draws", mc.reference_draws, "A_Lambda / Lambda reference draws (0: default)");
  app.add_option("--mc.level", mc.level, "counting level for many_to_one");
  app.add_option("--mc.x-min", mc.x_min, "smallest tail grid point");
  app.add_option("--mc.x-max", mc.x_max, "largest tail grid point and stop level");
  app.add_option("--mc.points-per-decade", mc.points_per_decade, "tail grid density (0: default)");
  app.add_option("--mc.ks-slack", mc.ks_slack, "slack for KS trend checks");
  app.add_option("--mc.ks-budget", mc.ks_budget, "KS budget for the t = 1 identity check");
  app.add_option("--mc.max-overflow", mc.max_overflow, "overflow fraction that invalidates a report");

  auto* env_check = app.add_subcommand("env-check", "check criticality and moment conditions of a model");
  std::size_t env_samples = 100'000;
  env_check->add_option("--samples", env_samples, "Monte Carlo samples for non-enumerable models")
      ->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "simulate one tree in a sampled environment");
  int sim_horizon = 50;
  bool sim_conditioned = false;
  simulate->add_option("--horizon", sim_horizon, "generations")->capture_default_str();
  simulate->add_flag("--conditioned", sim_conditioned, "reject until Z_n > 0");

  auto* reduced = app.add_subcommand("reduced", "survival table, Agresti bounds and one reduced tree");
  int red_horizon = 50;
  reduced->add_option("--horizon", red_horizon, "generations")->capture_default_str();

  auto* varopt = app.add_subcommand("varopt", "solve the budgeted variational problem A_f");
  std::string budget = "linear";
  double budget_c = 1.0;
  int grid = 2048;
  varopt->add_option("--f", budget, "linear (c t) | step (c 1{t >= 1/2}) | sqrt (c sqrt t)")
      ->check(CLI::IsMember({"linear", "step", "sqrt"}))
      ->capture_default_str();
  varopt->add_option("--c", budget_c, "budget scale")->capture_default_str();
  varopt->add_option("--grid", grid, "cells")->check(CLI::PositiveNumber)->capture_default_str();

  auto* meander = app.add_subcommand("meander", "sample Brownian meanders, Lambda and A_Lambda");
  std::uint64_t meander_samples = 1000;
  int meander_grid = 512;
  meander->add_option("--samples", meander_samples, "meander draws")->capture_default_str();
  meander->add_option("--grid", meander_grid, "cells")->check(CLI::PositiveNumber)->capture_default_str();

  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments");
  experiment->require_subcommand(1);
  auto* run = experiment->add_subcommand("run", "run one experiment and write its report");
  std::string experiment_name;
  run->add_option("name", experiment_name, "experiment")->required()->check(CLI::IsMember(experiment_names()));

  auto* report = app.add_subcommand("report", "print a saved experiment report");
  std::string report_path;
  report->add_option("path", report_path, "report JSON")->required()->check(CLI::ExistingFile);

  std::set<std::string> subcommand_names;
  for (const auto* sub : app.get_subcommands({})) subcommand_names.insert(sub->get_name());
  app.config_formatter(std::make_shared<ModuleIni>(subcommand_names));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }

  const CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  const std::string resolved = resolved_config(app, active);
  const fs::path out = output_dir;

  try {
    const EnvironmentModel model = model_flags.build();

    if (*env_check) {
      const CriticalityReport r = criticality_report(model, env_samples, seed);
      std::cout << model.describe() << "\n"
                << "E[X] = " << format_value(r.mean_x.value) << " (SE " << format_value(r.mean_x.standard_error)
                << ")\n"
                << "E[X^2] = " << format_value(r.second_moment.value) << " (SE "
                << format_value(r.second_moment.standard_error) << ")\n"
                << "E[(log+ kappa)^(2+delta)] = " << format_value(r.kappa_moment.value) << "\n"
                << (r.enumerated ? "exact enumeration\n" : "Monte Carlo\n")
                << (r.ok() ? "ok" : "VIOLATION") << (r.mean_violation ? " mean" : "")
                << (r.variance_violation ? " variance" : "") << (r.nonfinite ? " nonfinite" : "") << "\n";
      return r.ok() ? 0 : exit_invalid;
    }

    if (*simulate) {
      Rng rng = substream(seed, 0);
      SimulationOptions opts;
      opts.population_cap = cap;
      Environment env;
      TreeSample tree;
      if (sim_conditioned) {
        opts.keep_ancestry = true;
        auto s = conditioned_sample(model, sim_horizon, rng, 100'000'000, opts);
        env = std::move(s.environment);
        tree = std::move(s.tree);
      } else {
        env = sample_environment(model, static_cast<std::size_t>(sim_horizon), rng);
        tree = simulate_quenched(env, sim_horizon, rng, opts);
      }
      std::ostringstream csv;
      std::optional<ReducedCounts> rc;
      if (tree.has_ancestry() && tree.alive_at_horizon()) rc = reduced_counts(tree, sim_horizon);
      write_tree_csv(csv, tree, rc ? &*rc : nullptr);
      std::ostringstream envtext;
      write_environment(envtext, env);
      write_text(out / "tree.csv", header_block("simulate", resolved) + csv.str());
      write_text(out / "environment.txt", header_block("simulate", resolved) + envtext.str());
      std::cout << "Z_n = " << (tree.population.size() == static_cast<std::size_t>(sim_horizon) + 1
                                    ? std::to_string(tree.population.back())
                                    : std::string("overflow"))
                << ", M = " << format_value(tree.running_max) << "\n";
      return tree.overflow ? exit_invalid : 0;
    }

    if (*reduced) {
      Rng rng = substream(seed, 0);
      SimulationOptions opts;
      opts.population_cap = cap;
      const ConditionedSample s = conditioned_reduced_sample(model, red_horizon, rng, 100'000'000, opts);
      const SurvivalTable table = survival_table(s.environment, red_horizon);
      std::ostringstream surv;
      write_survival_csv(surv, s.environment, table);
      std::ostringstream tree;
      write_tree_csv(tree, s.tree, nullptr);
      write_text(out / "survival.csv", header_block("reduced", resolved) + surv.str());
      write_text(out / "reduced_tree.csv", header_block("reduced", resolved) + tree.str());
      std::cout << "P(0,n) = " << format_value(table.p(0)) << ", attempts " << s.attempts << ", M_n = "
                << format_value(s.tree.generation_max.back()) << "\n";
      return s.tree.overflow ? exit_invalid : 0;
    }

    if (*varopt) {
      std::function<double(double)> f;
      if (budget == "linear") {
        f = [&](double t) { return budget_c * t; };
      } else if (budget == "step") {
        f = [&](double t) { return t >= 0.5 ? budget_c : 0.0; };
      } else {
        f = [&](double t) { return budget_c * std::sqrt(t); };
      }
      const auto profile = budget_from_function<double>(f, grid);
      const auto solution = solve_a_f(profile);
      std::ostringstream csv;
      write_solution_csv(csv, profile, solution);
      write_text(out / "varopt.csv", header_block("varopt", resolved) + csv.str());
      std::cout << "A_f = " << format_value(solution.value) << "\n";
      return 0;
    }

    if (*meander) {
      std::ostringstream paths;
      std::ostringstream values;
      values << "sample,W1,A_lambda\n";
      values.precision(17);
      for (std::uint64_t i = 0; i < meander_samples; ++i) {
        Rng rng = substream(seed, i);
        const MeanderPath path = sample_meander(meander_grid, rng);
        const LambdaProcess lambda = future_min(path);
        if (i == 0) write_meander_csv(paths, path, lambda);
        values << i << ',' << path.values(path.values.size() - 1) << ',' << a_lambda(lambda) << '\n';
      }
      write_text(out / "meander.csv", header_block("meander", resolved) + paths.str());
      write_text(out / "a_lambda.csv", header_block("meander", resolved) + values.str());
      return 0;
    }

    if (*run) {
      ExperimentConfig config = default_config(experiment_name);
      config.seed = seed;
      config.threads = threads;
      if (!app.get_option("--env.model")->empty() || !app.get_option("--env.scale")->empty() ||
          !app.get_option("--env.law")->empty()) {
        config.model = model;
      }
      config.model.truncation = model.truncation;
      config.model.moment_exponent = model.moment_exponent;
      if (mc.replications > 0) config.replications = mc.replications;
      if (!mc.horizons.empty()) config.horizons = mc.horizons;
      if (mc.population_cap > 0) config.population_cap = mc.population_cap;
      if (mc.max_tries > 0) config.max_tries = mc.max_tries;
      if (mc.meander_grid > 0) config.meander_grid = mc.meander_grid;
      if (mc.reference_draws > 0) config.reference_draws = mc.reference_draws;
      if (mc.points_per_decade > 0) config.points_per_decade = mc.points_per_decade;
      if (mc.level) config.level = *mc.level;
      if (mc.x_min) config.x_min = *mc.x_min;
      if (mc.x_max) config.x_max = *mc.x_max;
      if (mc.ks_slack) config.ks_slack = *mc.ks_slack;
      if (mc.ks_budget) config.ks_budget = *mc.ks_budget;
      if (mc.max_overflow) config.max_overflow_fraction = *mc.max_overflow;

      const ExperimentReport r = run_experiment(config);
      nlohmann::json j = r.to_json();
      j["invocation"] = resolved;
      write_text(out / (experiment_name + "_report.json"), j.dump(2) + "\n");
      const std::string header = header_block("experiment run " + experiment_name, config.to_json().dump());
      for (const auto& t : r.tables) write_text(out / (t.name + ".csv"), header + t.to_csv());
      return print_report(j);
    }

    if (*report) {
      std::ifstream in(report_path);
      return print_report(nlohmann::json::parse(in));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
