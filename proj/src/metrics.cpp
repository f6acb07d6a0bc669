#include "rme/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rme/errors.hpp"

namespace rme::metrics {

namespace {

void require_same_shape(const RadioMap& a, const RadioMap& b) {
  if (a.grid() != b.grid() || a.bins() != b.bins()) throw ShapeError("estimate and truth shapes differ");
}

Eigen::VectorXd gaussian_taps(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double mid = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) g(i) = std::exp(-0.5 * (i - mid) * (i - mid) / (sigma * sigma));
  return g / g.sum();
}

// 'valid' separable filtering with taps g along both axes.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& x, const Eigen::VectorXd& g) {
  const Index w = g.size();
  const Index rows = x.rows() - w + 1, cols = x.cols() - w + 1;
  Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(rows, x.cols());
  for (Index i = 0; i < w; ++i) tmp += g(i) * x.middleRows(i, rows);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
  for (Index i = 0; i < w; ++i) out += g(i) * tmp.middleCols(i, cols);
  return out;
}

}  // namespace

double rse(const RadioMap& estimate, const RadioMap& truth) {
  require_same_shape(estimate, truth);
  const double denom = truth.matricized().squaredNorm();
  if (!(denom > 0.0)) throw ArgumentError("RSE is undefined for an all-zero truth");
  return (estimate.matricized() - truth.matricized()).squaredNorm() / denom;
}

double ssim(const Field& a, const Field& b, const SsimOptions& opts) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("ssim inputs differ in shape");
  if (a.size() == 0) throw ShapeError("ssim of an empty image");
  const int w = static_cast<int>(std::min<Index>({static_cast<Index>(opts.window), a.rows(), a.cols()}));
  const Eigen::VectorXd g = gaussian_taps(w, opts.gaussian_sigma);
  const Eigen::MatrixXd mu_a = filter_valid(a, g);
  const Eigen::MatrixXd mu_b = filter_valid(b, g);
  const Eigen::MatrixXd aa = filter_valid(a.cwiseProduct(a), g);
  const Eigen::MatrixXd bb = filter_valid(b.cwiseProduct(b), g);
  const Eigen::MatrixXd ab = filter_valid(a.cwiseProduct(b), g);
  const auto ma = mu_a.array(), mb = mu_b.array();
  const auto var_a = aa.array() - ma * ma;
  const auto var_b = bb.array() - mb * mb;
  const auto cov = ab.array() - ma * mb;
  const auto num = (2.0 * ma * mb + opts.c1) * (2.0 * cov + opts.c2);
  const auto den = (ma * ma + mb * mb + opts.c1) * (var_a + var_b + opts.c2);
  return (num / den).mean();
}

double mssim(const RadioMap& estimate, const RadioMap& truth, const SsimOptions& opts) {
  require_same_shape(estimate, truth);
  const double peak = truth.matricized().maxCoeff();
  const double floor = opts.floor_rel * (peak > 0.0 ? peak : 1.0);
  auto to_db = [floor](const Field& x) -> Field {
    return x.unaryExpr([floor](double v) { return 10.0 * std::log10(std::max(v, 0.0) + floor); });
  };
  double total = 0.0;
  for (Index k = 0; k < truth.bins(); ++k) {
    Field t = to_db(truth.band(k));
    Field e = to_db(estimate.band(k));
    const double lo = std::min(t.minCoeff(), e.minCoeff());
    const double hi = std::max(t.maxCoeff(), e.maxCoeff());
    if (hi > lo) {
      t = (t.array() - lo) / (hi - lo);
      e = (e.array() - lo) / (hi - lo);
    } else {
      t.setZero();
      e.setZero();
    }
    total += std::clamp(ssim(e, t, opts), 0.0, 1.0);
  }
  return total / static_cast<double>(truth.bins());
}

void write_csv_header(std::ostream& out) { out << "run_id,method,tau,sigma_s,snr,rse,mssim,seconds,iterations\n"; }

void write_csv_row(std::ostream& out, const MetricRow& row) {
  const auto old = out.precision(10);
  out << row.run_id << ',' << row.method << ',' << row.tau << ',' << row.sigma_s << ',';
  if (std::isnan(row.snr_db)) {
    out << "clean";
  } else {
    out << row.snr_db;
  }
  out << ',' << row.rse << ',' << row.mssim << ',' << row.seconds << ',' << row.iterations << '\n';
  out.precision(old);
}

}  // namespace rme::metrics
