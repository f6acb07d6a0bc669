#include "rme/solver.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "rme/errors.hpp"
#include "rme/init.hpp"

namespace rme::solver {

void SolverParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ArgumentError("lambda must be nonnegative");
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw ArgumentError("zeta must be positive");
  if (!(rho0 > 0.0) || !std::isfinite(rho0)) throw ArgumentError("rho0 must be positive");
  if (!(eta > 0.0 && eta <= 1.0)) throw ArgumentError("eta must lie in (0, 1]");
  if (!(gamma_rho > 1.0) || !std::isfinite(gamma_rho)) throw ArgumentError("gamma_rho must exceed 1");
  if (j_inner < 1) throw ArgumentError("j_inner must be at least 1");
  if (max_iter < 1) throw ArgumentError("max_iter must be at least 1");
  if (!(tol >= 0.0)) throw ArgumentError("tol must be nonnegative");
  if (!(divergence_threshold > 0.0)) throw ArgumentError("divergence threshold must be positive");
}

LatentProblem::LatentProblem(const MeasurementSet& meas)
    : y_(meas.normalized()),
      observed_(meas.mask().vec_indices()),
      unobserved_(meas.mask().complement()),
      grid_(meas.mask().dims()),
      scale_(meas.scale()) {}

Eigen::MatrixXd LatentProblem::gather(const Eigen::MatrixXd& full) const {
  Eigen::MatrixXd out(static_cast<Index>(observed_.size()), full.cols());
  for (std::size_t i = 0; i < observed_.size(); ++i) out.row(static_cast<Index>(i)) = full.row(observed_[i]);
  return out;
}

Eigen::MatrixXd LatentProblem::residual(const SolverState& st) const {
  return y_ - st.c * gather(st.s).transpose();
}

double LatentProblem::data_fit(const SolverState& st) const { return residual(st).squaredNorm(); }

double LatentProblem::subproblem_objective(const SolverState& st, double zeta) const {
  return data_fit(st) + zeta * st.c.squaredNorm() + 0.5 * st.rho * (st.s - st.z + st.psi).squaredNorm();
}

Eigen::VectorXd LatentProblem::grad_s(const SolverState& st, Index r) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grid_.cells());
  const Eigen::VectorXd on_obs = -2.0 * residual(st).transpose() * st.c.col(r);
  for (std::size_t i = 0; i < observed_.size(); ++i) g(observed_[i]) = on_obs(static_cast<Index>(i));
  return g;
}

void z_update(SolverState& st, std::vector<denoise::SlotDenoiser>& slots, GridDims grid, double lambda,
              int admm_iter) {
  if (static_cast<Index>(slots.size()) != st.s.cols()) throw ShapeError("one denoiser slot per emitter required");
  if (grid.cells() != st.s.rows()) throw ShapeError("grid does not match the latent fields");
  const double sigma = std::sqrt(lambda / st.rho);
  for (Index r = 0; r < st.s.cols(); ++r) {
    auto& slot = slots[static_cast<std::size_t>(r)];
    const Eigen::VectorXd input = st.s.col(r) + st.psi.col(r);
    const Field out = slot(unvec(input, grid), sigma, admm_iter);
    st.z.col(r) = vec(out);
  }
}

void hals_s_obs(SolverState& st, const LatentProblem& problem, Index r, Eigen::MatrixXd& resid) {
  const auto& obs = problem.observed();
  const Eigen::VectorXd c = st.c.col(r);
  const double cc = c.squaredNorm();
  const double half_rho = 0.5 * st.rho;
  const Eigen::VectorXd proj = resid.transpose() * c;
  Eigen::VectorXd change(static_cast<Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Index j = obs[i];
    const double old = st.s(j, r);
    const double num = half_rho * (st.z(j, r) - st.psi(j, r)) + proj(static_cast<Index>(i)) + cc * old;
    const double fresh = std::max(0.0, num / (cc + half_rho));
    st.s(j, r) = fresh;
    change(static_cast<Index>(i)) = fresh - old;
  }
  resid.noalias() -= c * change.transpose();
}

void hals_c(SolverState& st, const LatentProblem& problem, Index r, double zeta, Eigen::MatrixXd& resid) {
  const auto& obs = problem.observed();
  Eigen::VectorXd s(static_cast<Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) s(static_cast<Index>(i)) = st.s(obs[i], r);
  const Eigen::VectorXd old = st.c.col(r);
  const double ss = s.squaredNorm();
  const Eigen::VectorXd fresh = ((resid * s + ss * old) / (ss + zeta)).cwiseMax(0.0);
  st.c.col(r) = fresh;
  resid.noalias() -= (fresh - old) * s.transpose();
}

void s_unobs(SolverState& st, const LatentProblem& problem, Index r) {
  for (Index j : problem.unobserved()) st.s(j, r) = std::max(0.0, st.z(j, r) - st.psi(j, r));
}

void dual_update(SolverState& st) { st.psi += st.s - st.z; }

namespace {

double column_norm_sum(const Eigen::MatrixXd& d) {
  double total = 0.0;
  for (Index r = 0; r < d.cols(); ++r) total += d.col(r).norm();
  return total;
}

double next_rho(double rho, double delta, std::optional<double> prev, const SolverParams& p, bool& increased) {
  increased = prev.has_value() && delta >= p.eta * *prev;
  return increased ? rho * p.gamma_rho : rho;
}

}  // namespace

double residual_delta(const Snapshot& prev, const SolverState& cur) {
  const double cells = static_cast<double>(cur.s.rows());
  return (column_norm_sum(cur.s - prev.s) + column_norm_sum(cur.z - prev.z) + column_norm_sum(cur.psi - prev.psi)) /
         std::sqrt(cells);
}

RhoStep residual_and_rho(const Snapshot& prev, const SolverState& cur, std::optional<double> prev_delta,
                         const SolverParams& params) {
  RhoStep step;
  step.delta = residual_delta(prev, cur);
  step.rho = next_rho(cur.rho, step.delta, prev_delta, params, step.increased);
  return step;
}

namespace {

using Clock = std::chrono::steady_clock;

std::shared_ptr<denoise::PluginBridge> bridge_for(const denoise::DenoiserSpec& spec, const SolveOptions& opts) {
  if (spec.kind != denoise::Kind::external) return nullptr;
  if (opts.plugin) return opts.plugin;
  return std::make_shared<denoise::PluginBridge>(spec.command);
}

std::vector<denoise::SlotDenoiser> make_slots(const denoise::DenoiserSpec& spec, Index count,
                                              const std::shared_ptr<denoise::PluginBridge>& bridge) {
  std::vector<denoise::SlotDenoiser> slots;
  slots.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) slots.emplace_back(spec, bridge);
  return slots;
}

long total_calls(const std::vector<denoise::SlotDenoiser>& slots) {
  long n = 0;
  for (const auto& s : slots) n += s.calls();
  return n;
}

double max_boundedness(const std::vector<denoise::SlotDenoiser>& slots) {
  double b = 0.0;
  for (const auto& s : slots) b = std::max(b, s.last_boundedness());
  return b;
}

void check_divergence(double delta, int iter, const SolverParams& params) {
  if (!std::isfinite(delta) || delta > params.divergence_threshold) {
    throw DivergenceError("ADMM diverged at iteration " + std::to_string(iter) +
                          " (residual = " + std::to_string(delta) + ")");
  }
}

}  // namespace

LapnpResult lapnp_solve(const MeasurementSet& meas, Index r, const SolverParams& params,
                        const denoise::DenoiserSpec& spec, const SolveOptions& opts) {
  params.validate();
  spec.validate();
  if (r < 1) throw ArgumentError("rank must be at least 1");
  const LatentProblem problem(meas);
  const GridDims grid = problem.grid();

  const FactorModel start = opts.initial ? *opts.initial : init::initialize(problem.y(), meas.mask(), r);
  if (start.rank() != r || start.grid() != grid || start.bins() != problem.bins()) {
    throw ShapeError("initial factors do not match the measurements");
  }

  SolverState st;
  st.s = start.slf_matrix();
  st.c = start.psd_matrix();
  st.z = Eigen::MatrixXd::Zero(st.s.rows(), r);
  st.psi = Eigen::MatrixXd::Zero(st.s.rows(), r);
  st.rho = params.rho0;

  auto slots = make_slots(spec, r, bridge_for(spec, opts));

  LapnpResult result{start, RadioMap(grid.m, grid.n, problem.bins()), {}, {}, {}, false, 0};
  std::optional<double> prev_delta;
  for (int t = 1; t <= params.max_iter; ++t) {
    const auto t0 = Clock::now();
    const Snapshot prev = Snapshot::of(st);
    const long calls_before = total_calls(slots);

    z_update(st, slots, grid, params.lambda, t);
    Eigen::MatrixXd resid = problem.residual(st);
    for (int j = 0; j < params.j_inner; ++j) {
      for (Index q = 0; q < r; ++q) {
        hals_s_obs(st, problem, q, resid);
        hals_c(st, problem, q, params.zeta, resid);
      }
    }
    for (Index q = 0; q < r; ++q) s_unobs(st, problem, q);
    dual_update(st);

    const RhoStep step = residual_and_rho(prev, st, prev_delta, params);
    IterationRecord rec;
    rec.iter = t;
    rec.delta = step.delta;
    rec.rho = st.rho;
    resid = problem.residual(st);
    const double fit = resid.squaredNorm();
    rec.objective = fit + params.zeta * st.c.squaredNorm();
    rec.lagrangian = rec.objective + 0.5 * st.rho * ((st.s - st.z + st.psi).squaredNorm() - st.psi.squaredNorm());
    rec.denoiser_bound = max_boundedness(slots);
    const Eigen::MatrixXd g = -2.0 * resid.transpose() * st.c;  // |Omega| x R
    double gmax = 0.0;
    for (Index q = 0; q < r; ++q) gmax = std::max(gmax, g.col(q).norm());
    rec.grad_bound = gmax / std::sqrt(static_cast<double>(grid.cells()));
    rec.denoiser_calls = total_calls(slots) - calls_before;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();

    st.delta_history.push_back(step.delta);
    st.rho_history.push_back(st.rho);
    result.log.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec);
    check_divergence(step.delta, t, params);

    result.iterations = t;
    st.rho = step.rho;
    prev_delta = step.delta;
    if (step.delta < params.tol) {
      result.converged = true;
      break;
    }
  }

  std::vector<Field> slfs;
  std::vector<Eigen::VectorXd> psds;
  for (Index q = 0; q < r; ++q) {
    slfs.push_back(unvec(st.s.col(q), grid));
    psds.push_back(st.c.col(q) * problem.scale());
  }
  result.factors = FactorModel(std::move(slfs), std::move(psds));
  result.estimate = dematricize(problem.scale() * (st.c * st.s.transpose()), grid);
  for (const auto& slot : slots) {
    if (const auto* w = slot.linear()) {
      result.denoisers.emplace_back(*w);
    } else {
      result.denoisers.emplace_back(std::nullopt);
    }
  }
  result.state = std::move(st);
  return result;
}

DapnpResult dapnp_solve(const RadioMap& observed, const SamplingMask& mask, const SolverParams& params,
                        const denoise::DenoiserSpec& spec, const SolveOptions& opts) {
  params.validate();
  spec.validate();
  const GridDims grid = observed.grid();
  if (mask.dims() != grid) throw ShapeError("mask grid does not match the tensor");
  const MeasurementSet meas = restrict(observed, mask);
  const Eigen::MatrixXd y = meas.normalized();  // K x |Omega|
  const Index k = y.rows();
  const auto& obs = mask.vec_indices();
  const double cells = static_cast<double>(grid.cells());

  // Rows are bands: K x MN.
  Eigen::MatrixXd x(k, grid.cells());
  for (Index b = 0; b < k; ++b) x.row(b) = vec(init::nn_fill(y.row(b).transpose(), mask)).transpose();
  Eigen::MatrixXd z = x;
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(k, grid.cells());
  double rho = params.rho0;

  auto slots = make_slots(spec, k, bridge_for(spec, opts));

  DapnpResult result{RadioMap(grid.m, grid.n, k), {}, false, 0};
  std::optional<double> prev_delta;
  for (int t = 1; t <= params.max_iter; ++t) {
    const auto t0 = Clock::now();
    const Eigen::MatrixXd x0 = x, z0 = z, u0 = u;
    const long calls_before = total_calls(slots);

    x = z - u;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Index j = obs[i];
      for (Index b = 0; b < k; ++b) x(b, j) = dapnp_observed_x(y(b, static_cast<Index>(i)), x(b, j), rho);
    }
    const double sigma = std::sqrt(params.lambda / rho);
    for (Index b = 0; b < k; ++b) {
      const Eigen::VectorXd input = (x.row(b) + u.row(b)).transpose();
      const Field out = slots[static_cast<std::size_t>(b)](unvec(input, grid), sigma, t);
      z.row(b) = vec(out).transpose();
    }
    u += x - z;

    double delta = 0.0;
    for (Index b = 0; b < k; ++b) {
      delta += (x.row(b) - x0.row(b)).norm() + (z.row(b) - z0.row(b)).norm() + (u.row(b) - u0.row(b)).norm();
    }
    delta /= std::sqrt(cells);

    IterationRecord rec;
    rec.iter = t;
    rec.delta = delta;
    rec.rho = rho;
    double fit = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      fit += (y.col(static_cast<Index>(i)) - x.col(obs[i])).squaredNorm();
    }
    rec.objective = fit;
    rec.lagrangian = fit + 0.5 * rho * ((x - z + u).squaredNorm() - u.squaredNorm());
    rec.denoiser_bound = max_boundedness(slots);
    rec.denoiser_calls = total_calls(slots) - calls_before;
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.log.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec);
    check_divergence(delta, t, params);

    result.iterations = t;
    bool increased = false;
    rho = next_rho(rho, delta, prev_delta, params, increased);
    prev_delta = delta;
    if (delta < params.tol) {
      result.converged = true;
      break;
    }
  }
  result.estimate = RadioMap(grid.m, grid.n, meas.scale() * x);
  return result;
}

void write_run_log(std::ostream& out, const std::vector<IterationRecord>& log) {
  for (const auto& rec : log) {
    nlohmann::json j = {{"iter", rec.iter},
                        {"delta", rec.delta},
                        {"rho", rec.rho},
                        {"objective", rec.objective},
                        {"lagrangian", rec.lagrangian},
                        {"denoiser_bound", rec.denoiser_bound},
                        {"grad_bound", rec.grad_bound},
                        {"denoiser_calls", rec.denoiser_calls},
                        {"seconds", rec.seconds}};
    out << j.dump() << '\n';
  }
}

}  // namespace rme::solver
