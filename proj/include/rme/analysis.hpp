#pragma once

#include <optional>
#include <vector>

#include "json.hpp"
#include "rme/core.hpp"
#include "rme/denoise.hpp"
#include "rme/solver.hpp"

namespace rme::analysis {

struct SpectralReport {
  double symmetric_err = 0.0;
  double min_entry = 0.0;
  double row_sum_dev = 0.0;
  double col_sum_dev = 0.0;
  bool irreducible = false;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  /// Second largest eigenvalue (below 1 for a single Perron root).
  double lambda_second = 0.0;
  bool eigs_in_unit_interval = false;
  bool passes = false;
};

/// Dense eigendecomposition; limited to MN <= 4096.
SpectralReport verify_assumption1(const Eigen::MatrixXd& w);
SpectralReport verify_assumption1(const denoise::LinearDenoiser& w);

/// W = Q diag(lam) Q^T split into the range (|lam| > 1e-10) and its complement.
struct Eigensystem {
  Eigen::MatrixXd q;
  Eigen::VectorXd lam;
  Eigen::MatrixXd q_null;

  static Eigensystem of(const Eigen::MatrixXd& w, double threshold = 1e-10);
  Index dim() const noexcept { return q.rows(); }
};

/// (rho / 2 lambda) z^T Q (Lam^-1 - I) Q^T z when z lies in range(Q), +inf otherwise.
double explicit_regularizer(const Eigensystem& es, const Eigen::VectorXd& z, double rho, double lambda);
double explicit_regularizer(const Eigen::MatrixXd& w, const Eigen::VectorXd& z, double rho, double lambda);

struct BoundReport {
  double v_obj_natural = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda_min_G = 0.0;
  double observed_norm = 0.0;
  bool rank_deficient = false;
  double theorem1_rhs = 0.0;
  double gap_bound = 0.0;
  double xi = 0.0;
  double iota = 0.0;
};

/// Factor energy bounds for a latent solve. Everything is in the solver's
/// normalized units: the truth's spectra and the noise are divided by the
/// measurement scale. `solution_c` (K x R) supplies the spectra inside G.
/// Dense: requires MN * R <= 3000.
BoundReport lemma2_bounds(const FactorModel& truth, const MeasurementSet& meas, const RadioMap* noise,
                          const std::vector<Eigen::MatrixXd>& w_per_r, const Eigen::MatrixXd& solution_c, double rho,
                          double zeta);

struct Theorem1Input {
  double alpha = 0.0;
  double beta = 0.0;
  double iota = 0.0;
  double v_obj_natural = 0.0;
  double noise_norm = 0.0;
  Index m = 0, n = 0, k = 0, r = 0;
  Index omega = 0;
  double delta = 0.05;
  /// Covering radius; defaults to 0.01 sqrt(alpha beta).
  std::optional<double> eps;
};

struct Theorem1Report {
  double xi = 0.0;
  double eps = 0.0;
  double log_covering = 0.0;
  double log10_covering = 0.0;
  double eps_omega = 0.0;
  double gap_bound = 0.0;
  double rhs = 0.0;
};

Theorem1Report theorem1_bound(const Theorem1Input& in);

struct KktReport {
  double stationarity_s = 0.0;
  double stationarity_c = 0.0;
  double sign_s = 0.0;
  double sign_c = 0.0;
  double complementarity_s = 0.0;
  double complementarity_c = 0.0;
  double range = 0.0;
  double max = 0.0;
};

/// KKT residual of the explicit problem at a solver state, with multipliers
/// recovered from the ADMM variables. Each term is relative to its scale;
/// the record holds the max over emitters.
KktReport kkt_residual(const solver::SolverState& st, const solver::LatentProblem& problem,
                       const std::vector<Eigen::MatrixXd>& w_per_r, double zeta);
KktReport kkt_residual(const solver::SolverState& st, const solver::LatentProblem& problem,
                       const std::vector<std::optional<denoise::LinearDenoiser>>& denoisers, double zeta);

nlohmann::json to_json(const SpectralReport& r);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const Theorem1Report& r);
nlohmann::json to_json(const KktReport& r);

}  // namespace rme::analysis
