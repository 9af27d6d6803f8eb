#include "brwre/varopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace brwre {
namespace {

// Best sum_i sqrt(2 u_i quantum Δ_i) over integer u with prefix sums <= caps.
double best_lattice_value(const std::vector<std::size_t>& caps, const std::vector<double>& dt, double quantum) {
  const std::size_t cells = dt.size();
  const std::size_t total = caps.back();
  constexpr double unreachable = -std::numeric_limits<double>::infinity();
  // best[u]: best value so far with exactly u units spent in the cells seen.
  std::vector<double> best(total + 1, unreachable);
  best[0] = 0.0;
  std::vector<double> gain(total + 1);
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t u = 0; u <= total; ++u) gain[u] = std::sqrt(2.0 * static_cast<double>(u) * quantum * dt[c]);
    std::vector<double> next(total + 1, unreachable);
    const std::size_t cap = caps[c + 1];
    for (std::size_t used = 0; used <= cap; ++used) {
      if (best[used] == unreachable) continue;
      for (std::size_t add = 0; used + add <= cap; ++add) {
        next[used + add] = std::max(next[used + add], best[used] + gain[add]);
      }
    }
    best = std::move(next);
  }
  return *std::max_element(best.begin(), best.end());
}

}  // namespace

BruteForceBracket brute_force_a_f(const BudgetProfile<double>& f, double quantum, std::size_t max_work) {
  const auto m = f.cells();
  if (m > brute_force_max_cells) throw std::invalid_argument("brute-force search supports at most 8 cells");
  if (!(quantum > 0.0)) throw std::invalid_argument("energy quantum must be positive");

  std::vector<double> dt(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) dt[static_cast<std::size_t>(i)] = f.grid(i + 1) - f.grid(i);

  std::vector<std::size_t> floor_caps(static_cast<std::size_t>(m) + 1);
  std::vector<std::size_t> ceil_caps(static_cast<std::size_t>(m) + 1);
  for (Eigen::Index i = 0; i <= m; ++i) {
    const double units = f.values(i) / quantum;
    if (units > 1e9) throw std::invalid_argument("brute-force search space too large");
    floor_caps[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(units + 1e-12));
    ceil_caps[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::ceil(units - 1e-12));
  }
  const double top = static_cast<double>(ceil_caps.back()) + 1.0;
  if (static_cast<double>(m) * top * top / 2.0 > static_cast<double>(max_work)) {
    throw std::invalid_argument("brute-force search space too large");
  }

  BruteForceBracket out;
  out.lower = best_lattice_value(floor_caps, dt, quantum);
  double slack = 0.0;
  for (double d : dt) slack += std::sqrt(2.0 * quantum * d);
  out.upper = best_lattice_value(ceil_caps, dt, quantum) + slack;
  out.quantization_bound = out.upper - out.lower;
  return out;
}

void write_solution_csv(std::ostream& out, const BudgetProfile<double>& f, const Solution<double>& s) {
  out << "t,f,g_star,prefix_energy\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < f.grid.size(); ++i) {
    out << f.grid(i) << ',' << f.values(i) << ',' << s.optimizer.values(i) << ',' << s.prefix_energy(i) << '\n';
  }
}

}  // namespace brwre
