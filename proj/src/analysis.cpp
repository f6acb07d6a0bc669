#include "rme/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rme/errors.hpp"

namespace rme::analysis {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool connected(const Eigen::MatrixXd& w) {
  const Index n = w.rows();
  if (n == 0) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<Index> queue{0};
  seen[0] = 1;
  Index reached = 1;
  while (!queue.empty()) {
    const Index i = queue.front();
    queue.pop_front();
    for (Index j = 0; j < n; ++j) {
      if (seen[static_cast<std::size_t>(j)] || j == i) continue;
      if (w(i, j) != 0.0 || w(j, i) != 0.0) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++reached;
        queue.push_back(j);
      }
    }
  }
  return reached == n;
}

double symmetry_error(const Eigen::MatrixXd& w) { return (w - w.transpose()).cwiseAbs().maxCoeff(); }

}  // namespace

SpectralReport verify_assumption1(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) throw ShapeError("W must be square and nonempty");
  if (w.rows() > 4096) throw ArgumentError("dense spectral check limited to 4096 cells");
  SpectralReport rep;
  rep.symmetric_err = symmetry_error(w);
  rep.min_entry = w.minCoeff();
  rep.row_sum_dev = (w.rowwise().sum().array() - 1.0).abs().maxCoeff();
  rep.col_sum_dev = (w.colwise().sum().array() - 1.0).abs().maxCoeff();
  rep.irreducible = connected(w);

  Eigen::VectorXd eig;
  if (rep.symmetric_err <= 1e-10) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    eig = es.eigenvalues();
  } else {
    Eigen::EigenSolver<Eigen::MatrixXd> es(w, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    eig = es.eigenvalues().real();
    std::sort(eig.data(), eig.data() + eig.size());
  }
  const Index n = eig.size();
  rep.lambda_min = eig(0);
  rep.lambda_max = eig(n - 1);
  rep.lambda_second = n > 1 ? eig(n - 2) : -kInf;
  rep.eigs_in_unit_interval = rep.lambda_min >= -1e-8 && rep.lambda_max <= 1.0 + 1e-8;
  rep.passes = rep.min_entry >= -1e-12 && rep.symmetric_err <= 1e-10 && rep.irreducible && rep.eigs_in_unit_interval &&
               rep.lambda_second < 1.0 - 1e-12;
  return rep;
}

SpectralReport verify_assumption1(const denoise::LinearDenoiser& w) { return verify_assumption1(w.dense()); }

Eigensystem Eigensystem::of(const Eigen::MatrixXd& w, double threshold) {
  if (w.rows() != w.cols()) throw ShapeError("W must be square");
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if (symmetry_error(w) > 1e-8 * scale) throw UnsupportedDenoiserError("explicit regularizer needs a symmetric W");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  std::vector<Index> keep, drop;
  for (Index i = 0; i < lam.size(); ++i) (std::abs(lam(i)) > threshold ? keep : drop).push_back(i);
  Eigensystem out;
  out.q.resize(w.rows(), static_cast<Index>(keep.size()));
  out.lam.resize(static_cast<Index>(keep.size()));
  out.q_null.resize(w.rows(), static_cast<Index>(drop.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.q.col(static_cast<Index>(i)) = es.eigenvectors().col(keep[i]);
    out.lam(static_cast<Index>(i)) = lam(keep[i]);
  }
  for (std::size_t i = 0; i < drop.size(); ++i) out.q_null.col(static_cast<Index>(i)) = es.eigenvectors().col(drop[i]);
  return out;
}

double explicit_regularizer(const Eigensystem& es, const Eigen::VectorXd& z, double rho, double lambda) {
  if (z.size() != es.dim()) throw ShapeError("z does not match W");
  if (!(lambda > 0.0) || !(rho > 0.0)) throw ArgumentError("rho and lambda must be positive");
  const Eigen::VectorXd t = es.q.transpose() * z;
  if ((z - es.q * t).norm() > 1e-8 * z.norm()) return kInf;
  const Eigen::ArrayXd weight = es.lam.array().inverse() - 1.0;
  return rho / (2.0 * lambda) * (weight * t.array().square()).sum();
}

double explicit_regularizer(const Eigen::MatrixXd& w, const Eigen::VectorXd& z, double rho, double lambda) {
  return explicit_regularizer(Eigensystem::of(w), z, rho, lambda);
}

Theorem1Report theorem1_bound(const Theorem1Input& in) {
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw ArgumentError("delta must lie in (0, 1)");
  if (!(in.alpha > 0.0) || !(in.beta > 0.0) || !(in.iota >= 0.0)) {
    throw ArgumentError("alpha and beta must be positive");
  }
  if (in.m < 1 || in.n < 1 || in.k < 1 || in.r < 1) throw ArgumentError("dimensions must be positive");
  const double cells = static_cast<double>(in.m * in.n);
  const double omega = static_cast<double>(in.omega);
  if (omega < 1.0 || omega > cells) throw ArgumentError("|Omega| must lie in [1, MN]");
  const double k = static_cast<double>(in.k), r = static_cast<double>(in.r);

  Theorem1Report rep;
  rep.eps = in.eps ? *in.eps : 0.01 * std::sqrt(in.alpha * in.beta);
  if (!(rep.eps > 0.0)) throw ArgumentError("covering radius must be positive");
  rep.xi = (k * in.iota * in.iota + in.alpha * in.beta) / k;

  const double log_cover = 0.5 * k * r * std::log(in.alpha) + 0.5 * cells * r * std::log(in.beta) +
                           r * (k + cells) * std::log(3.0 * (std::sqrt(in.alpha) + std::sqrt(in.beta)) / rep.eps);
  rep.log_covering = std::max(0.0, log_cover);
  rep.log10_covering = rep.log_covering / std::log(10.0);

  const double factor = 1.0 / omega - 1.0 / cells + 1.0 / (cells * omega);
  const double log_term = std::log(2.0) + rep.log_covering - std::log(in.delta);
  // sqrt(factor * xi^2 / 2 * log_term), assembled in log space.
  rep.eps_omega = std::exp(0.5 * (std::log(factor) + 2.0 * std::log(rep.xi) - std::log(2.0) + std::log(log_term)));
  rep.gap_bound = std::sqrt(rep.eps * rep.eps / omega + rep.eps * rep.eps / cells + rep.eps_omega);
  rep.rhs = std::sqrt(in.v_obj_natural / (omega * k)) + in.noise_norm / std::sqrt(cells * k) + rep.gap_bound;
  return rep;
}

BoundReport lemma2_bounds(const FactorModel& truth, const MeasurementSet& meas, const RadioMap* noise,
                          const std::vector<Eigen::MatrixXd>& w_per_r, const Eigen::MatrixXd& solution_c, double rho,
                          double zeta) {
  const GridDims grid = meas.mask().dims();
  const Index r = truth.rank();
  if (truth.grid() != grid || truth.bins() != meas.bins()) throw ShapeError("truth does not match the measurements");
  if (static_cast<Index>(w_per_r.size()) != r) throw ShapeError("one W per emitter required");
  if (solution_c.rows() != meas.bins() || solution_c.cols() != r) throw ShapeError("solution spectra shape mismatch");
  if (grid.cells() * r > 3000) throw ArgumentError("dense bound evaluation limited to MN * R <= 3000");
  if (!(rho > 0.0) || !(zeta > 0.0)) throw ArgumentError("rho and zeta must be positive");

  const double scale = meas.scale();
  const Eigen::MatrixXd s_nat = truth.slf_matrix();
  const Eigen::MatrixXd c_nat = truth.psd_matrix() / scale;
  const auto& obs = meas.mask().vec_indices();

  std::vector<Eigensystem> es;
  double prior = 0.0;
  for (Index q = 0; q < r; ++q) {
    if (w_per_r[static_cast<std::size_t>(q)].rows() != grid.cells()) throw ShapeError("W does not match the grid");
    es.push_back(Eigensystem::of(w_per_r[static_cast<std::size_t>(q)]));
    // lambda cancels: lambda * r(s) = (rho / 2) s^T Q (Lam^-1 - I) Q^T s.
    prior += explicit_regularizer(es.back(), s_nat.col(q), rho, 1.0);
  }
  double noise_obs = 0.0, noise_all = 0.0;
  if (noise) {
    const Eigen::MatrixXd v = noise->matricized() / scale;
    noise_all = v.norm();
    for (Index j : obs) noise_obs += v.col(j).squaredNorm();
  }

  BoundReport rep;
  rep.v_obj_natural = prior + zeta * c_nat.squaredNorm() + noise_obs;
  rep.alpha = rep.v_obj_natural / zeta;
  rep.observed_norm = meas.normalized().norm();
  rep.iota = meas.normalized().maxCoeff();

  std::vector<Index> offset{0};
  for (const auto& e : es) offset.push_back(offset.back() + e.lam.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(offset.back(), offset.back());
  std::vector<Eigen::MatrixXd> q_obs;
  for (const auto& e : es) {
    Eigen::MatrixXd rows(static_cast<Index>(obs.size()), e.q.cols());
    for (std::size_t i = 0; i < obs.size(); ++i) rows.row(static_cast<Index>(i)) = e.q.row(obs[i]);
    q_obs.push_back(std::move(rows));
  }
  for (Index a = 0; a < r; ++a) {
    for (Index b = 0; b < r; ++b) {
      const double cc = solution_c.col(a).dot(solution_c.col(b));
      const auto& qa = q_obs[static_cast<std::size_t>(a)];
      const auto& qb = q_obs[static_cast<std::size_t>(b)];
      g.block(offset[static_cast<std::size_t>(a)], offset[static_cast<std::size_t>(b)], qa.cols(), qb.cols()) =
          cc * qa.transpose() * qb;
    }
    const auto& lam = es[static_cast<std::size_t>(a)].lam;
    g.diagonal().segment(offset[static_cast<std::size_t>(a)], lam.size()).array() +=
        0.5 * rho * (lam.array().inverse() - 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ges(g, Eigen::EigenvaluesOnly);
  if (ges.info() != Eigen::Success) throw NumericalError("eigensolver failed on G");
  rep.lambda_min_G = g.rows() > 0 ? ges.eigenvalues()(0) : 0.0;
  rep.rank_deficient = !(rep.lambda_min_G > 1e-12);
  const double num = std::sqrt(2.0 * rep.v_obj_natural) + rep.observed_norm;
  rep.beta = rep.rank_deficient ? kInf : num * num / rep.lambda_min_G;

  if (std::isfinite(rep.alpha) && std::isfinite(rep.beta) && rep.alpha > 0.0 && rep.beta > 0.0) {
    Theorem1Input in;
    in.alpha = rep.alpha;
    in.beta = rep.beta;
    in.iota = rep.iota;
    in.v_obj_natural = rep.v_obj_natural;
    in.noise_norm = noise_all;
    in.m = grid.m;
    in.n = grid.n;
    in.k = meas.bins();
    in.r = r;
    in.omega = meas.mask().size();
    const Theorem1Report t = theorem1_bound(in);
    rep.theorem1_rhs = t.rhs;
    rep.gap_bound = t.gap_bound;
    rep.xi = t.xi;
  } else {
    rep.theorem1_rhs = rep.gap_bound = rep.xi = kInf;
  }
  return rep;
}

namespace {

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

KktReport kkt_residual(const solver::SolverState& st, const solver::LatentProblem& problem,
                       const std::vector<Eigen::MatrixXd>& w_per_r, double zeta) {
  const Index r = st.s.cols();
  if (static_cast<Index>(w_per_r.size()) != r) throw ShapeError("one W per emitter required");
  const double rho = st.rho;
  const Eigen::MatrixXd resid = problem.residual(st);
  const auto& obs = problem.observed();
  KktReport rep;
  for (Index q = 0; q < r; ++q) {
    const Eigensystem es = Eigensystem::of(w_per_r[static_cast<std::size_t>(q)]);
    if (es.dim() != st.s.rows()) throw ShapeError("W does not match the grid");
    const Eigen::VectorXd s = st.s.col(q), psi = st.psi.col(q), c = st.c.col(q);

    Eigen::VectorXd grad_s = Eigen::VectorXd::Zero(s.size());
    const Eigen::VectorXd g_obs = -2.0 * resid.transpose() * c;
    Eigen::VectorXd s_obs(static_cast<Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      grad_s(obs[i]) = g_obs(static_cast<Index>(i));
      s_obs(static_cast<Index>(i)) = s(obs[i]);
    }
    const Eigen::VectorXd alpha = -(grad_s + rho * psi);
    const Eigen::VectorXd t = es.q.transpose() * s;
    const Eigen::VectorXd reg = ((es.lam.array().inverse() - 1.0) * t.array()).matrix();
    const double stat = rho * (reg - es.q.transpose() * psi).norm();
    const double scale_s = grad_s.norm() + rho * psi.norm() + rho * reg.norm();

    const Eigen::VectorXd grad_c = -2.0 * resid * s_obs;
    const Eigen::VectorXd beta = -(grad_c + 2.0 * zeta * c);
    const double scale_c = grad_c.norm() + 2.0 * zeta * c.norm();

    const double s_inf = s.cwiseAbs().maxCoeff(), c_inf = c.cwiseAbs().maxCoeff();
    const double neg_s = safe_ratio(s.cwiseMin(0.0).norm(), s.norm());
    const double neg_c = safe_ratio(c.cwiseMin(0.0).norm(), c.norm());

    rep.stationarity_s = std::max(rep.stationarity_s, safe_ratio(stat, scale_s));
    rep.stationarity_c = std::max(rep.stationarity_c, safe_ratio((grad_c + 2.0 * zeta * c + beta).norm(), scale_c));
    rep.sign_s = std::max({rep.sign_s, safe_ratio(alpha.cwiseMax(0.0).norm(), scale_s), neg_s});
    rep.sign_c = std::max({rep.sign_c, safe_ratio(beta.cwiseMax(0.0).norm(), scale_c), neg_c});
    rep.complementarity_s =
        std::max(rep.complementarity_s, safe_ratio(alpha.cwiseProduct(s).cwiseAbs().maxCoeff(), scale_s * s_inf));
    rep.complementarity_c =
        std::max(rep.complementarity_c, safe_ratio(beta.cwiseProduct(c).cwiseAbs().maxCoeff(), scale_c * c_inf));
    if (es.q_null.cols() > 0) rep.range = std::max(rep.range, safe_ratio((es.q_null.transpose() * s).norm(), s.norm()));
  }
  rep.max = std::max({rep.stationarity_s, rep.stationarity_c, rep.sign_s, rep.sign_c, rep.complementarity_s,
                      rep.complementarity_c, rep.range});
  return rep;
}

KktReport kkt_residual(const solver::SolverState& st, const solver::LatentProblem& problem,
                       const std::vector<std::optional<denoise::LinearDenoiser>>& denoisers, double zeta) {
  std::vector<Eigen::MatrixXd> ws;
  for (const auto& d : denoisers) {
    if (!d) throw UnsupportedDenoiserError("KKT residual needs an explicit linear denoiser");
    ws.push_back(d->dense());
  }
  return kkt_residual(st, problem, ws, zeta);
}

nlohmann::json to_json(const SpectralReport& r) {
  return {{"symmetric_err", r.symmetric_err}, {"min_entry", r.min_entry},
          {"row_sum_dev", r.row_sum_dev},     {"col_sum_dev", r.col_sum_dev},
          {"irreducible", r.irreducible},     {"lambda_max", r.lambda_max},
          {"lambda_min", r.lambda_min},       {"lambda_second", r.lambda_second},
          {"eigs_in_unit_interval", r.eigs_in_unit_interval}, {"passes", r.passes}};
}

namespace {

// JSON has no infinity; emit null for non-finite values.
nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const BoundReport& r) {
  return {{"v_obj_natural", num(r.v_obj_natural)}, {"alpha", num(r.alpha)},
          {"beta", num(r.beta)},                   {"lambda_min_G", num(r.lambda_min_G)},
          {"observed_norm", num(r.observed_norm)}, {"rank_deficient", r.rank_deficient},
          {"theorem1_rhs", num(r.theorem1_rhs)},   {"gap_bound", num(r.gap_bound)},
          {"xi", num(r.xi)},                       {"iota", num(r.iota)}};
}

nlohmann::json to_json(const Theorem1Report& r) {
  return {{"xi", num(r.xi)},
          {"eps", num(r.eps)},
          {"log_covering", num(r.log_covering)},
          {"log10_covering", num(r.log10_covering)},
          {"eps_omega", num(r.eps_omega)},
          {"gap_bound", num(r.gap_bound)},
          {"rhs", num(r.rhs)}};
}

nlohmann::json to_json(const KktReport& r) {
  return {{"stationarity_s", r.stationarity_s},       {"stationarity_c", r.stationarity_c},
          {"sign_s", r.sign_s},                       {"sign_c", r.sign_c},
          {"complementarity_s", r.complementarity_s}, {"complementarity_c", r.complementarity_c},
          {"range", r.range},                         {"max", r.max}};
}

}  // namespace rme::analysis
