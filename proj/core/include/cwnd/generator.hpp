#pragma once

// Count-level Markov generator for processor-sharing networks with capped
// windows. Independent of the product form, so it serves as an oracle for it.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "cwnd/model.hpp"

namespace cwnd {

struct Generator {
  int c = 1;
  std::size_t width = 0;
  /// States in the same shell-then-lexicographic order as StationaryTable.
  std::vector<int> states;
  /// Row-major rate matrix; rows sum to zero.
  Eigen::SparseMatrix<double, Eigen::RowMajor> rates;

  std::size_t size() const noexcept { return width == 0 ? 0 : states.size() / width; }
  std::span<const int> state(std::size_t s) const { return {states.data() + s * width, width}; }
  std::optional<std::size_t> find(std::span<const int> m) const;
};

/// Requires processor sharing everywhere and window caps whose total at level c
/// is at most n_max. Throws UnsupportedError otherwise.
Generator aggregated_generator(const Network& net, int c, int n_max);

struct GeneratorSolution {
  std::vector<double> probs;
  double residual = 0.0;  // max |(pi Q)_s|
};

/// Solves pi Q = 0 with sum pi = 1. Throws DomainError on a reducible chain and
/// NonConvergenceError when the residual stays above 1e-10.
GeneratorSolution generator_solve(const Generator& gen);

}  // namespace cwnd
