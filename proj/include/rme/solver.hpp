#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "rme/core.hpp"
#include "rme/denoise.hpp"

namespace rme::solver {

struct SolverParams {
  double lambda = 1e-2;
  double zeta = 1e-3;
  double rho0 = 1.0;
  double eta = 0.95;
  double gamma_rho = 1.1;
  int j_inner = 20;
  int max_iter = 100;
  double tol = 1e-4;
  double divergence_threshold = 1e6;

  void validate() const;
};

/// Iterates of the latent-domain ADMM, all in normalized data units.
/// s, z, psi are MN x R (column r = vec of the r-th field); c is K x R.
struct SolverState {
  Eigen::MatrixXd s;
  Eigen::MatrixXd c;
  Eigen::MatrixXd z;
  Eigen::MatrixXd psi;
  double rho = 1.0;
  std::vector<double> delta_history;
  std::vector<double> rho_history;
};

struct IterationRecord {
  int iter = 0;
  double delta = 0.0;
  double rho = 0.0;
  double objective = 0.0;
  double lagrangian = 0.0;
  /// Largest |D(X) - X|_F^2 / (MN sigma^2) over this iteration's calls.
  double denoiser_bound = 0.0;
  /// Largest |grad_{s_r} f|_2 / sqrt(MN) over r.
  double grad_bound = 0.0;
  long denoiser_calls = 0;
  double seconds = 0.0;
};

/// Normalized observations plus the index bookkeeping every update needs.
class LatentProblem {
 public:
  explicit LatentProblem(const MeasurementSet& meas);

  const Eigen::MatrixXd& y() const noexcept { return y_; }
  const std::vector<Index>& observed() const noexcept { return observed_; }
  const std::vector<Index>& unobserved() const noexcept { return unobserved_; }
  GridDims grid() const noexcept { return grid_; }
  Index bins() const noexcept { return y_.rows(); }
  double scale() const noexcept { return scale_; }

  /// Rows of an MN x R matrix at the observed cells (|Omega| x R).
  Eigen::MatrixXd gather(const Eigen::MatrixXd& full) const;
  /// Y(:, Omega) - C S(Omega)^T.
  Eigen::MatrixXd residual(const SolverState& st) const;
  /// |Y(:, Omega) - C S(Omega)^T|_F^2.
  double data_fit(const SolverState& st) const;
  /// Data fit + zeta sum |c_r|^2 + rho/2 sum |s_r - z_r + psi_r|^2, the
  /// objective the HALS blocks descend.
  double subproblem_objective(const SolverState& st, double zeta) const;
  /// Gradient of the data fit w.r.t. vec(S_r), MN entries (zero off Omega).
  Eigen::VectorXd grad_s(const SolverState& st, Index r) const;

 private:
  Eigen::MatrixXd y_;
  std::vector<Index> observed_;
  std::vector<Index> unobserved_;
  GridDims grid_;
  double scale_ = 1.0;
};

/// Z_r = D_sigma(S_r + Psi_r) with sigma = sqrt(lambda / rho); one call per r.
void z_update(SolverState& st, std::vector<denoise::SlotDenoiser>& slots, GridDims grid, double lambda,
              int admm_iter);

// HALS blocks. `resid` must equal problem.residual(st) on entry and is kept
// equal to it on exit.
void hals_s_obs(SolverState& st, const LatentProblem& problem, Index r, Eigen::MatrixXd& resid);
void hals_c(SolverState& st, const LatentProblem& problem, Index r, double zeta, Eigen::MatrixXd& resid);
void s_unobs(SolverState& st, const LatentProblem& problem, Index r);
void dual_update(SolverState& st);

struct Snapshot {
  Eigen::MatrixXd s;
  Eigen::MatrixXd z;
  Eigen::MatrixXd psi;
  static Snapshot of(const SolverState& st) { return {st.s, st.z, st.psi}; }
};

/// (1/sqrt(MN)) sum_r (|ds_r| + |dz_r| + |dpsi_r|).
double residual_delta(const Snapshot& prev, const SolverState& cur);

struct RhoStep {
  double delta = 0.0;
  double rho = 0.0;
  bool increased = false;
};

/// rho grows by gamma_rho iff delta >= eta * previous delta.
RhoStep residual_and_rho(const Snapshot& prev, const SolverState& cur, std::optional<double> prev_delta,
                         const SolverParams& params);

struct SolveOptions {
  /// Shared plugin process for external denoisers (spawned on demand otherwise).
  std::shared_ptr<denoise::PluginBridge> plugin;
  /// Called after every outer iteration.
  std::function<void(const IterationRecord&)> on_iteration;
  /// Start from these factors instead of SPA + nearest-neighbour fill
  /// (normalized units).
  std::optional<FactorModel> initial;
};

struct LapnpResult {
  /// Factors in the caller's units (spectra carry the measurement scale).
  FactorModel factors;
  RadioMap estimate;
  SolverState state;
  std::vector<IterationRecord> log;
  /// Final explicit denoiser per emitter (empty for non-linear kinds).
  std::vector<std::optional<denoise::LinearDenoiser>> denoisers;
  bool converged = false;
  int iterations = 0;
};

LapnpResult lapnp_solve(const MeasurementSet& meas, Index r, const SolverParams& params,
                        const denoise::DenoiserSpec& spec, const SolveOptions& opts = {});

struct DapnpResult {
  RadioMap estimate;
  std::vector<IterationRecord> log;
  bool converged = false;
  int iterations = 0;
};

/// Observed-entry X-step of the data-domain ADMM: argmin over x of
/// (y - x)^2 + rho/2 (x - v)^2.
inline double dapnp_observed_x(double y, double v, double rho) { return (2.0 * y + rho * v) / (2.0 + rho); }

/// Data-domain PnP ADMM, denoising each of the K band images per iteration.
/// `observed` is the full tensor; only masked cells are read.
DapnpResult dapnp_solve(const RadioMap& observed, const SamplingMask& mask, const SolverParams& params,
                        const denoise::DenoiserSpec& spec, const SolveOptions& opts = {});

/// One JSON object per line: iter, delta, rho, objective, monitors.
void write_run_log(std::ostream& out, const std::vector<IterationRecord>& log);

}  // namespace rme::solver
