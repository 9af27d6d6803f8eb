#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace brwre {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <typename Scalar>
void check_grid(const Vector<Scalar>& grid) {
  if (grid.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (grid(0) != Scalar(0) || grid(grid.size() - 1) != Scalar(1)) {
    throw std::invalid_argument("grid must run from 0 to 1");
  }
  for (Eigen::Index i = 1; i < grid.size(); ++i) {
    if (!(grid(i) > grid(i - 1))) throw std::invalid_argument("grid must be strictly increasing");
  }
}

}  // namespace detail

/// Nondecreasing budget f on a grid of [0, 1] with f(0) = 0. Step functions
/// are admitted.
template <typename Scalar>
struct BudgetProfile {
  Vector<Scalar> grid;
  Vector<Scalar> values;

  BudgetProfile(Vector<Scalar> t, Vector<Scalar> f) : grid(std::move(t)), values(std::move(f)) {
    detail::check_grid(grid);
    if (values.size() != grid.size()) throw std::invalid_argument("budget and grid sizes differ");
    if (values(0) != Scalar(0)) throw std::invalid_argument("budget must vanish at 0");
    for (Eigen::Index i = 1; i < values.size(); ++i) {
      if (!(values(i) >= values(i - 1))) throw std::invalid_argument("budget must be nondecreasing");
    }
  }

  Eigen::Index cells() const { return grid.size() - 1; }
};

/// Grid values of a path g with g(0) = 0, linear between grid points.
template <typename Scalar>
struct PathProfile {
  Vector<Scalar> grid;
  Vector<Scalar> values;

  PathProfile(Vector<Scalar> t, Vector<Scalar> g) : grid(std::move(t)), values(std::move(g)) {
    detail::check_grid(grid);
    if (values.size() != grid.size()) throw std::invalid_argument("path and grid sizes differ");
    if (values(0) != Scalar(0)) throw std::invalid_argument("path must start at 0");
    if (!values.allFinite()) throw std::invalid_argument("path values must be finite");
  }

  /// Piecewise-constant derivative per cell.
  Vector<Scalar> slopes() const {
    const auto m = grid.size() - 1;
    return (values.tail(m) - values.head(m)).cwiseQuotient(grid.tail(m) - grid.head(m));
  }
};

template <typename Scalar>
Vector<Scalar> uniform_grid(Eigen::Index cells) {
  if (cells < 1) throw std::invalid_argument("grid needs at least one cell");
  Vector<Scalar> t = Vector<Scalar>::LinSpaced(cells + 1, Scalar(0), Scalar(1));
  t(cells) = Scalar(1);
  return t;
}

template <typename Scalar>
BudgetProfile<Scalar> budget_from_function(const std::function<Scalar(Scalar)>& f, Eigen::Index cells) {
  Vector<Scalar> t = uniform_grid<Scalar>(cells);
  Vector<Scalar> v = t.unaryExpr([&f](Scalar x) { return f(x); });
  v(0) = Scalar(0);
  return BudgetProfile<Scalar>(std::move(t), std::move(v));
}

/// Q(y_i) = sum over cells up to y_i of g'² Δ / 2.
template <typename Scalar>
Vector<Scalar> prefix_energy(const PathProfile<Scalar>& g) {
  const auto m = g.grid.size() - 1;
  const Vector<Scalar> dg = g.values.tail(m) - g.values.head(m);
  const Vector<Scalar> dt = g.grid.tail(m) - g.grid.head(m);
  Vector<Scalar> q(m + 1);
  q(0) = Scalar(0);
  for (Eigen::Index i = 0; i < m; ++i) q(i + 1) = q(i) + dg(i) * dg(i) / (Scalar(2) * dt(i));
  return q;
}

/// S_f(g) = max over grid prefixes r of [Q(r) - f(r)]. Never +inf on a finite grid.
template <typename Scalar>
Scalar rate_function(const PathProfile<Scalar>& g, const BudgetProfile<Scalar>& f) {
  if (g.grid.size() != f.grid.size() || g.grid != f.grid) throw std::invalid_argument("path and budget grids differ");
  return (prefix_energy(g) - f.values).maxCoeff();
}

/// Prefix energies Q and the generalized inverse φ(h) = inf{y : Q(y) > h},
/// with Q linear inside each cell.
template <typename Scalar>
struct EnergyLedger {
  Vector<Scalar> grid;
  Vector<Scalar> prefix;

  /// Returns 1 when Q never exceeds h.
  Scalar phi(Scalar h) const {
    for (Eigen::Index i = 1; i < prefix.size(); ++i) {
      if (prefix(i) > h) {
        const Scalar below = prefix(i - 1);
        if (below > h) return grid(i - 1);
        const Scalar frac = (h - below) / (prefix(i) - below);
        return grid(i - 1) + frac * (grid(i) - grid(i - 1));
      }
    }
    return Scalar(1);
  }
};

template <typename Scalar>
EnergyLedger<Scalar> energy_cdf_and_inverse(const PathProfile<Scalar>& g) {
  return EnergyLedger<Scalar>{g.grid, prefix_energy(g)};
}

struct SolverOptions {
  double constraint_slack = 1e-9;
};

template <typename Scalar>
struct Solution {
  Scalar value;
  PathProfile<Scalar> optimizer;
  Vector<Scalar> prefix_energy;
};

/// Greatest convex minorant of the points (t_i, f_i), evaluated on the grid.
template <typename Scalar>
Vector<Scalar> greatest_convex_minorant(const Vector<Scalar>& t, const Vector<Scalar>& f) {
  std::vector<Eigen::Index> hull;
  hull.reserve(static_cast<std::size_t>(t.size()));
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    while (hull.size() >= 2) {
      const auto a = hull[hull.size() - 2];
      const auto b = hull.back();
      // Drop b unless it lies strictly below the chord from a to i.
      const Scalar cross = (t(b) - t(a)) * (f(i) - f(a)) - (f(b) - f(a)) * (t(i) - t(a));
      if (cross > Scalar(0)) break;
      hull.pop_back();
    }
    hull.push_back(i);
  }
  Vector<Scalar> out(t.size());
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const auto a = hull[h];
    const auto b = hull[h + 1];
    const Scalar slope = (f(b) - f(a)) / (t(b) - t(a));
    for (Eigen::Index i = a; i <= b; ++i) out(i) = f(a) + slope * (t(i) - t(a));
  }
  if (hull.size() == 1) out(0) = f(0);
  return out;
}

/// A_f = sup{ g(1) : Q(r) <= f(r) at every grid point r }.
///
/// With per-cell energies e_i the objective is sum_i sqrt(2 e_i Δ_i), concave,
/// under prefix-sum constraints. The optimal prefix-energy curve is the
/// greatest convex minorant of f: slopes of g are then nondecreasing, and the
/// curve touches f exactly where the slope changes. `brute_force_a_f`
/// cross-checks this on small grids.
template <typename Scalar>
Solution<Scalar> solve_a_f(const BudgetProfile<Scalar>& f, const SolverOptions& options = {}) {
  (void)options;
  const auto m = f.cells();
  Vector<Scalar> energy = greatest_convex_minorant(f.grid, f.values);
  energy(0) = Scalar(0);
  for (Eigen::Index i = 1; i <= m; ++i) {
    energy(i) = std::min(energy(i), f.values(i));
    energy(i) = std::max(energy(i), energy(i - 1));
  }
  Vector<Scalar> g(m + 1);
  g(0) = Scalar(0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Scalar e = energy(i + 1) - energy(i);
    const Scalar dt = f.grid(i + 1) - f.grid(i);
    g(i + 1) = g(i) + std::sqrt(Scalar(2) * e * dt);
  }
  PathProfile<Scalar> path(f.grid, g);
  Vector<Scalar> q = prefix_energy(path);
  const Scalar value = g(m);
  return Solution<Scalar>{value, std::move(path), std::move(q)};
}

template <typename Scalar>
Scalar a_f(const BudgetProfile<Scalar>& f) {
  return solve_a_f(f).value;
}

/// Exhaustive-search bracket for A_f on a small grid.
struct BruteForceBracket {
  double lower = 0.0;               ///< best value over quantized allocations (feasible)
  double upper = 0.0;               ///< provable upper bound on A_f
  double quantization_bound = 0.0;  ///< upper - lower
};

inline constexpr Eigen::Index brute_force_max_cells = 8;

/// Searches all allocations e_i = k_i * quantum with prefix sums <= f over
/// grids of at most 8 cells. The search is organized as a table over
/// (cell, energy used) so every admissible allocation is covered exactly once.
/// Lower bound: best allocation under floor(f / quantum) units. Upper bound:
/// best allocation under ceil(f / quantum) units plus sum_i sqrt(2 quantum Δ_i),
/// since rounding any feasible prefix-energy curve up to the lattice loses at
/// most one quantum per cell.
BruteForceBracket brute_force_a_f(const BudgetProfile<double>& f, double quantum,
                                  std::size_t max_work = 200'000'000);

/// CSV with columns t,f,g_star,prefix_energy.
void write_solution_csv(std::ostream& out, const BudgetProfile<double>& f, const Solution<double>& s);

}  // namespace brwre
