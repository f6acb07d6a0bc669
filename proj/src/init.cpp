#include "rme/init.hpp"

#include <limits>
#include <string>

#include "rme/errors.hpp"

namespace rme::init {

std::vector<Index> spa_select(const Eigen::MatrixXd& ymat, Index r) {
  if (r < 1) throw ArgumentError("SPA needs r >= 1");
  if (r > std::min(ymat.rows(), ymat.cols())) {
    throw ArgumentError("SPA needs r <= min(K, |Omega|)");
  }
  Eigen::MatrixXd resid = ymat;
  Eigen::VectorXd norms = resid.colwise().squaredNorm().transpose();
  const double initial = std::sqrt(norms.maxCoeff());
  std::vector<Index> picks;
  for (Index step = 0; step < r; ++step) {
    Index best = 0;
    const double best_sq = norms.maxCoeff(&best);
    if (!(std::sqrt(best_sq) > 1e-12 * initial)) {
      throw RankDeficiencyError("SPA residual collapsed after " + std::to_string(step) + " of " +
                                std::to_string(r) + " picks");
    }
    picks.push_back(best);
    const Eigen::VectorXd u = resid.col(best) / std::sqrt(best_sq);
    resid -= u * (u.transpose() * resid);
    norms = resid.colwise().squaredNorm().transpose();
  }
  return picks;
}

namespace {

double separable_objective(const Eigen::MatrixXd& y, const Eigen::MatrixXd& c, const Eigen::MatrixXd& s) {
  return (y - c * s.transpose()).squaredNorm();
}

}  // namespace

ObservedFactors init_factors(const Eigen::MatrixXd& ymat, Index r, int sweeps) {
  ObservedFactors out;
  out.anchors = spa_select(ymat, r);
  out.c.resize(ymat.rows(), r);
  for (Index q = 0; q < r; ++q) {
    Eigen::VectorXd col = ymat.col(out.anchors[static_cast<std::size_t>(q)]).cwiseMax(0.0);
    const double nrm = col.norm();
    if (!(nrm > 0.0)) throw RankDeficiencyError("SPA picked a column with no positive entries");
    out.c.col(q) = col / nrm;
  }

  // HALS on S with C fixed. Residual E = Y - C S^T is maintained in place.
  out.s_obs = Eigen::MatrixXd::Zero(ymat.cols(), r);
  Eigen::MatrixXd resid = ymat;
  out.objective_trace.reserve(static_cast<std::size_t>(sweeps));
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (Index q = 0; q < r; ++q) {
      const double cc = out.c.col(q).squaredNorm();
      Eigen::VectorXd updated =
          ((resid.transpose() * out.c.col(q)) / cc + out.s_obs.col(q)).cwiseMax(0.0);
      resid -= out.c.col(q) * (updated - out.s_obs.col(q)).transpose();
      out.s_obs.col(q) = updated;
    }
    out.objective_trace.push_back(separable_objective(ymat, out.c, out.s_obs));
  }
  return out;
}

std::vector<Index> nearest_observed(const SamplingMask& mask) {
  const GridDims g = mask.dims();
  const auto& obs = mask.vec_indices();
  std::vector<Cell> obs_cells = mask.cells();
  std::vector<Index> nearest(static_cast<std::size_t>(g.cells()));
  for (Index j = 0; j < g.cells(); ++j) {
    if (mask.observed(j)) {
      nearest[static_cast<std::size_t>(j)] = j;
      continue;
    }
    const Cell c = vec_coords(j, g);
    Index best = -1;
    Index best_d2 = std::numeric_limits<Index>::max();
    // obs is ascending, so a strict comparison keeps the smaller index on ties.
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Index dm = obs_cells[i].m - c.m;
      const Index dn = obs_cells[i].n - c.n;
      const Index d2 = dm * dm + dn * dn;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = obs[i];
      }
    }
    nearest[static_cast<std::size_t>(j)] = best;
  }
  return nearest;
}

Field nn_fill(const Eigen::VectorXd& observed_values, const SamplingMask& mask) {
  if (observed_values.size() != mask.size()) throw ShapeError("value count differs from mask size");
  const GridDims g = mask.dims();
  Eigen::VectorXd full = Eigen::VectorXd::Zero(g.cells());
  const auto& obs = mask.vec_indices();
  for (std::size_t i = 0; i < obs.size(); ++i) full(obs[i]) = observed_values(static_cast<Index>(i));
  const auto nearest = nearest_observed(mask);
  for (Index j = 0; j < g.cells(); ++j) full(j) = full(nearest[static_cast<std::size_t>(j)]);
  return unvec(full, g);
}

FactorModel initialize(const Eigen::MatrixXd& ymat, const SamplingMask& mask, Index r) {
  ObservedFactors obs = init_factors(ymat, r);
  std::vector<Field> slfs;
  std::vector<Eigen::VectorXd> psds;
  for (Index q = 0; q < r; ++q) {
    slfs.push_back(nn_fill(obs.s_obs.col(q), mask));
    psds.push_back(obs.c.col(q));
  }
  return FactorModel(std::move(slfs), std::move(psds));
}

}  // namespace rme::init
