#pragma once

#include <vector>

#include "rme/core.hpp"

namespace rme::init {

/// Successive projection: pick the largest-norm column, project every column
/// onto the orthogonal complement of the pick, repeat. Returns picks in order.
std::vector<Index> spa_select(const Eigen::MatrixXd& ymat, Index r);

struct ObservedFactors {
  /// K x R, unit-norm columns.
  Eigen::MatrixXd c;
  /// |Omega| x R; row i belongs to the i-th observed cell.
  Eigen::MatrixXd s_obs;
  std::vector<Index> anchors;
  /// Separable-NMF objective |Y - C S^T|_F^2 after each HALS sweep.
  std::vector<double> objective_trace;
};

/// SPA-selected spectra followed by `sweeps` HALS passes for the observed
/// SLF entries with the spectra held fixed.
ObservedFactors init_factors(const Eigen::MatrixXd& ymat, Index r, int sweeps = 50);

/// Nearest observed cell (Euclidean, ties to the smaller linear index) for
/// every grid cell. `observed_values` follows mask.vec_indices() order.
Field nn_fill(const Eigen::VectorXd& observed_values, const SamplingMask& mask);

/// Linear index of the nearest observed cell for every cell of the grid.
std::vector<Index> nearest_observed(const SamplingMask& mask);

/// Initial full SLFs and spectra for the ADMM loop.
FactorModel initialize(const Eigen::MatrixXd& ymat, const SamplingMask& mask, Index r);

}  // namespace rme::init
