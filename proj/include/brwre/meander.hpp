#pragma once

#include <cstdint>
#include <iosfwd>

#include <Eigen/Core>

#include "brwre/rng.hpp"
#include "brwre/varopt.hpp"

namespace brwre {

/// Discretized Brownian meander on the uniform grid t_i = i/m.
struct MeanderPath {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;  ///< W⁺(t_i); 0 at t_0, strictly positive afterwards
};

/// Λ_{t_i} = min_{j >= i} W⁺(t_j).
struct LambdaProcess {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;
};

/// Meander as the radial part of a 3-d Brownian bridge from 0 to (R, 0, 0),
/// R Rayleigh: W⁺(t) = |(R t + b₁(t), b₂(t), b₃(t))| with b_j independent
/// standard bridges. Exact in law at the grid points.
MeanderPath sample_meander(int m, Rng& rng);

/// Gaussian random walk with N(0, 1/m) steps, rejected until it stays strictly
/// positive at t_1..t_m. Converges to the meander as m grows; used as an
/// independent check on `sample_meander`.
MeanderPath sample_meander_rejection(int m, Rng& rng, std::uint64_t max_tries = 100'000'000);

/// Right-to-left running minimum.
template <typename Derived>
Vector<typename Derived::Scalar> future_min(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> out(w.size());
  if (w.size() == 0) return out;
  out(w.size() - 1) = w(w.size() - 1);
  for (Eigen::Index i = w.size() - 1; i-- > 0;) out(i) = std::min(w(i), out(i + 1));
  return out;
}

LambdaProcess future_min(const MeanderPath& path);

/// A_Λ for one meander draw on m cells.
double sample_a_lambda(Rng& rng, int m, const SolverOptions& options = {});

/// A_Λ for a given Λ on its own grid.
double a_lambda(const LambdaProcess& lambda, const SolverOptions& options = {});

/// CSV with columns t,W,Lambda.
void write_meander_csv(std::ostream& out, const MeanderPath& path, const LambdaProcess& lambda);

}  // namespace brwre
