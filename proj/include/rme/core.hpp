#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rme {

using Index = Eigen::Index;

// An M x N spatial field. Column-major storage, so the flat buffer order is
// exactly the vectorization used throughout (linear index n*M + m).
using Field = Eigen::MatrixXd;

struct GridDims {
  Index m = 0;
  Index n = 0;

  Index cells() const noexcept { return m * n; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

struct Cell {
  Index m = 0;
  Index n = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Column-major linear index of grid cell (m, n), 0-based.
Index vec_index(Index m, Index n, GridDims dims);
Cell vec_coords(Index linear, GridDims dims);

/// Dense M x N x K tensor of power values, held in matricized form
/// (K x MN, column j = all bins of cell vec_coords(j)).
///
/// Entries are always finite. Ground-truth and estimated maps are
/// nonnegative; noise realizations and noisy observations may not be, so
/// nonnegativity is checked by is_nonnegative() rather than enforced here.
class RadioMap {
 public:
  RadioMap() = default;
  RadioMap(Index m, Index n, Index k);
  RadioMap(Index m, Index n, Eigen::MatrixXd matricized);

  Index rows() const noexcept { return m_; }
  Index cols() const noexcept { return n_; }
  Index bins() const noexcept { return matricized_.rows(); }
  GridDims grid() const noexcept { return {m_, n_}; }
  Index size() const noexcept { return matricized_.size(); }

  double operator()(Index m, Index n, Index k) const;

  const Eigen::MatrixXd& matricized() const noexcept { return matricized_; }
  Field band(Index k) const;
  bool is_nonnegative() const;
  double frobenius_norm() const { return matricized_.norm(); }

 private:
  Index m_ = 0;
  Index n_ = 0;
  Eigen::MatrixXd matricized_;
};

/// Set of observed grid cells. Stored sorted by linear index.
class SamplingMask {
 public:
  SamplingMask(GridDims dims, const std::vector<Cell>& cells);
  static SamplingMask from_linear(GridDims dims, std::vector<Index> linear);
  static SamplingMask full(GridDims dims);

  GridDims dims() const noexcept { return dims_; }
  Index size() const noexcept { return static_cast<Index>(linear_.size()); }
  const std::vector<Index>& vec_indices() const noexcept { return linear_; }
  std::vector<Cell> cells() const;
  bool observed(Index linear) const { return observed_.at(static_cast<std::size_t>(linear)); }
  /// Linear indices of unobserved cells, ascending.
  std::vector<Index> complement() const;

 private:
  SamplingMask() = default;
  GridDims dims_;
  std::vector<Index> linear_;
  std::vector<bool> observed_;
};

/// R (spatial loss field, spectrum) pairs.
class FactorModel {
 public:
  FactorModel(std::vector<Field> slfs, std::vector<Eigen::VectorXd> psds);

  Index rank() const noexcept { return static_cast<Index>(slfs_.size()); }
  GridDims grid() const noexcept { return {slfs_.front().rows(), slfs_.front().cols()}; }
  Index bins() const noexcept { return psds_.front().size(); }
  const std::vector<Field>& slfs() const noexcept { return slfs_; }
  const std::vector<Eigen::VectorXd>& psds() const noexcept { return psds_; }

  /// MN x R matrix whose column r is vec(S_r).
  Eigen::MatrixXd slf_matrix() const;
  /// K x R matrix whose column r is c_r.
  Eigen::MatrixXd psd_matrix() const;

 private:
  std::vector<Field> slfs_;
  std::vector<Eigen::VectorXd> psds_;
};

/// Observed columns Y(:, Omega_vec) in ascending linear-index order plus the
/// normalization constant the solvers divide by.
class MeasurementSet {
 public:
  MeasurementSet(Eigen::MatrixXd ymat, SamplingMask mask, double scale);

  const Eigen::MatrixXd& ymat() const noexcept { return ymat_; }
  const SamplingMask& mask() const noexcept { return mask_; }
  double scale() const noexcept { return scale_; }
  Index bins() const noexcept { return ymat_.rows(); }
  /// ymat / scale, so the largest observed entry is 1.
  Eigen::MatrixXd normalized() const { return ymat_ / scale_; }

 private:
  Eigen::MatrixXd ymat_;
  SamplingMask mask_;
  double scale_;
};

RadioMap compose(const FactorModel& model);
Eigen::MatrixXd matricize(const RadioMap& x);
RadioMap dematricize(const Eigen::MatrixXd& y, GridDims dims);

/// Gathers the observed columns of a K x MN matricized tensor. Values are
/// copied untouched; the scale is the largest observed entry (1 when no
/// entry is positive).
MeasurementSet restrict(const Eigen::MatrixXd& y, const SamplingMask& mask);
MeasurementSet restrict(const RadioMap& y, const SamplingMask& mask);

inline Eigen::Map<const Eigen::VectorXd> vec(const Field& f) {
  return {f.data(), f.size()};
}
inline Field unvec(const Eigen::VectorXd& v, GridDims dims) {
  return Eigen::Map<const Field>(v.data(), dims.m, dims.n);
}

}  // namespace rme
