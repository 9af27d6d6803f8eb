#include "brwre/meander.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace brwre {
namespace {

// Standard Brownian bridge on the uniform grid with m cells.
void fill_bridge(Eigen::Ref<Eigen::VectorXd> out, int m, Rng& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(m));
  out(0) = 0.0;
  for (int i = 1; i <= m; ++i) out(i) = out(i - 1) + sd * standard_normal(rng);
  const double end = out(m);
  for (int i = 0; i <= m; ++i) out(i) -= end * static_cast<double>(i) / m;
  out(m) = 0.0;
}

}  // namespace

MeanderPath sample_meander(int m, Rng& rng) {
  if (m < 2) throw std::invalid_argument("meander grid needs m >= 2");
  MeanderPath path;
  path.grid = uniform_grid<double>(m);
  const double endpoint = std::sqrt(-2.0 * std::log(uniform_open(rng)));
  Eigen::Matrix<double, Eigen::Dynamic, 3> bridges(m + 1, 3);
  for (int j = 0; j < 3; ++j) fill_bridge(bridges.col(j), m, rng);
  bridges.col(0) += endpoint * path.grid;
  path.values = bridges.rowwise().norm();
  path.values(0) = 0.0;
  for (int i = 1; i <= m; ++i) {
    if (!(path.values(i) > 0.0)) path.values(i) = std::numeric_limits<double>::min();
  }
  return path;
}

MeanderPath sample_meander_rejection(int m, Rng& rng, std::uint64_t max_tries) {
  if (m < 2) throw std::invalid_argument("meander grid needs m >= 2");
  const double sd = 1.0 / std::sqrt(static_cast<double>(m));
  MeanderPath path;
  path.grid = uniform_grid<double>(m);
  path.values.resize(m + 1);
  for (std::uint64_t attempt = 0; attempt < max_tries; ++attempt) {
    path.values(0) = 0.0;
    bool positive = true;
    for (int i = 1; i <= m && positive; ++i) {
      path.values(i) = path.values(i - 1) + sd * standard_normal(rng);
      positive = path.values(i) > 0.0;
    }
    if (positive) return path;
  }
  throw std::runtime_error("meander rejection sampler exhausted its attempts");
}

LambdaProcess future_min(const MeanderPath& path) { return LambdaProcess{path.grid, future_min(path.values)}; }

double a_lambda(const LambdaProcess& lambda, const SolverOptions& options) {
  Eigen::VectorXd f = lambda.values;
  f(0) = 0.0;
  return solve_a_f(BudgetProfile<double>(lambda.grid, std::move(f)), options).value;
}

double sample_a_lambda(Rng& rng, int m, const SolverOptions& options) {
  return a_lambda(future_min(sample_meander(m, rng)), options);
}

void write_meander_csv(std::ostream& out, const MeanderPath& path, const LambdaProcess& lambda) {
  out << "t,W,Lambda\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < path.grid.size(); ++i) {
    out << path.grid(i) << ',' << path.values(i) << ',' << lambda.values(i) << '\n';
  }
}

}  // namespace brwre
