#include "rme/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rme/errors.hpp"

namespace rme {

namespace {

void check_dims(Index m, Index n, Index k) {
  if (m < 1 || n < 1 || k < 1) {
    throw ShapeError("tensor dimensions must be >= 1, got " + std::to_string(m) + "x" +
                     std::to_string(n) + "x" + std::to_string(k));
  }
}

}  // namespace

Index vec_index(Index m, Index n, GridDims dims) {
  if (m < 0 || m >= dims.m || n < 0 || n >= dims.n) {
    throw RangeError("cell (" + std::to_string(m) + "," + std::to_string(n) +
                     ") outside " + std::to_string(dims.m) + "x" + std::to_string(dims.n) +
                     " grid");
  }
  return n * dims.m + m;
}

Cell vec_coords(Index linear, GridDims dims) {
  if (linear < 0 || linear >= dims.cells()) {
    throw RangeError("linear index " + std::to_string(linear) + " outside grid");
  }
  return {linear % dims.m, linear / dims.m};
}

RadioMap::RadioMap(Index m, Index n, Index k) : m_(m), n_(n) {
  check_dims(m, n, k);
  matricized_ = Eigen::MatrixXd::Zero(k, m * n);
}

RadioMap::RadioMap(Index m, Index n, Eigen::MatrixXd matricized)
    : m_(m), n_(n), matricized_(std::move(matricized)) {
  check_dims(m, n, matricized_.rows());
  if (matricized_.cols() != m * n) {
    throw ShapeError("matricized tensor has " + std::to_string(matricized_.cols()) +
                     " columns, expected " + std::to_string(m * n));
  }
  if (!matricized_.allFinite()) throw ArgumentError("radio map contains non-finite entries");
}

double RadioMap::operator()(Index m, Index n, Index k) const {
  if (k < 0 || k >= bins()) throw RangeError("frequency bin out of range");
  return matricized_(k, vec_index(m, n, grid()));
}

Field RadioMap::band(Index k) const {
  if (k < 0 || k >= bins()) throw RangeError("frequency bin out of range");
  Eigen::VectorXd row = matricized_.row(k).transpose();
  return unvec(row, grid());
}

bool RadioMap::is_nonnegative() const { return (matricized_.array() >= 0.0).all(); }

SamplingMask::SamplingMask(GridDims dims, const std::vector<Cell>& cells) {
  std::vector<Index> linear;
  linear.reserve(cells.size());
  for (const auto& c : cells) linear.push_back(vec_index(c.m, c.n, dims));
  *this = from_linear(dims, std::move(linear));
}

SamplingMask SamplingMask::from_linear(GridDims dims, std::vector<Index> linear) {
  if (dims.m < 1 || dims.n < 1) throw ShapeError("mask grid must be at least 1x1");
  if (linear.empty()) throw ArgumentError("sampling mask must contain at least one cell");
  std::sort(linear.begin(), linear.end());
  if (std::adjacent_find(linear.begin(), linear.end()) != linear.end()) {
    throw ArgumentError("sampling mask contains duplicate cells");
  }
  SamplingMask mask;
  mask.dims_ = dims;
  mask.observed_.assign(static_cast<std::size_t>(dims.cells()), false);
  for (Index j : linear) {
    if (j < 0 || j >= dims.cells()) throw RangeError("mask index outside grid");
    mask.observed_[static_cast<std::size_t>(j)] = true;
  }
  mask.linear_ = std::move(linear);
  return mask;
}

SamplingMask SamplingMask::full(GridDims dims) {
  std::vector<Index> all(static_cast<std::size_t>(dims.cells()));
  for (Index j = 0; j < dims.cells(); ++j) all[static_cast<std::size_t>(j)] = j;
  return from_linear(dims, std::move(all));
}

std::vector<Cell> SamplingMask::cells() const {
  std::vector<Cell> out;
  out.reserve(linear_.size());
  for (Index j : linear_) out.push_back(vec_coords(j, dims_));
  return out;
}

std::vector<Index> SamplingMask::complement() const {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(dims_.cells()) - linear_.size());
  for (Index j = 0; j < dims_.cells(); ++j) {
    if (!observed_[static_cast<std::size_t>(j)]) out.push_back(j);
  }
  return out;
}

FactorModel::FactorModel(std::vector<Field> slfs, std::vector<Eigen::VectorXd> psds)
    : slfs_(std::move(slfs)), psds_(std::move(psds)) {
  if (slfs_.empty()) throw ShapeError("factor model needs at least one emitter");
  if (slfs_.size() != psds_.size()) throw ShapeError("SLF and PSD counts differ");
  const Index m = slfs_.front().rows();
  const Index n = slfs_.front().cols();
  const Index k = psds_.front().size();
  if (m < 1 || n < 1 || k < 1) throw ShapeError("empty factor");
  for (std::size_t r = 0; r < slfs_.size(); ++r) {
    if (slfs_[r].rows() != m || slfs_[r].cols() != n) throw ShapeError("SLF dims differ across emitters");
    if (psds_[r].size() != k) throw ShapeError("PSD length differs across emitters");
    if (!slfs_[r].allFinite() || (slfs_[r].array() < 0.0).any()) {
      throw ArgumentError("SLF must be finite and nonnegative");
    }
    if (!psds_[r].allFinite() || (psds_[r].array() < 0.0).any()) {
      throw ArgumentError("PSD must be finite and nonnegative");
    }
  }
}

Eigen::MatrixXd FactorModel::slf_matrix() const {
  const GridDims g = grid();
  Eigen::MatrixXd s(g.cells(), rank());
  for (Index r = 0; r < rank(); ++r) s.col(r) = vec(slfs_[static_cast<std::size_t>(r)]);
  return s;
}

Eigen::MatrixXd FactorModel::psd_matrix() const {
  Eigen::MatrixXd c(bins(), rank());
  for (Index r = 0; r < rank(); ++r) c.col(r) = psds_[static_cast<std::size_t>(r)];
  return c;
}

MeasurementSet::MeasurementSet(Eigen::MatrixXd ymat, SamplingMask mask, double scale)
    : ymat_(std::move(ymat)), mask_(std::move(mask)), scale_(scale) {
  if (ymat_.cols() != mask_.size()) {
    throw ShapeError("measurement column count differs from mask size");
  }
  if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw ArgumentError("scale must be positive");
}

RadioMap compose(const FactorModel& model) {
  const GridDims g = model.grid();
  Eigen::MatrixXd x = model.psd_matrix() * model.slf_matrix().transpose();
  return RadioMap(g.m, g.n, std::move(x));
}

Eigen::MatrixXd matricize(const RadioMap& x) { return x.matricized(); }

RadioMap dematricize(const Eigen::MatrixXd& y, GridDims dims) {
  return RadioMap(dims.m, dims.n, y);
}

MeasurementSet restrict(const Eigen::MatrixXd& y, const SamplingMask& mask) {
  if (y.cols() != mask.dims().cells()) throw ShapeError("mask grid does not match tensor");
  const auto& idx = mask.vec_indices();
  Eigen::MatrixXd cols(y.rows(), static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) cols.col(static_cast<Index>(i)) = y.col(idx[i]);
  const double peak = cols.size() > 0 ? cols.maxCoeff() : 0.0;
  const double scale = peak > 0.0 ? peak : 1.0;
  return MeasurementSet(std::move(cols), mask, scale);
}

MeasurementSet restrict(const RadioMap& y, const SamplingMask& mask) {
  if (!(y.grid() == mask.dims())) throw ShapeError("mask grid does not match tensor");
  return restrict(y.matricized(), mask);
}

}  // namespace rme
