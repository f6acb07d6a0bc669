#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "rme/core.hpp"

namespace rme::test {

inline Eigen::MatrixXd uniform(Index rows, Index cols, std::uint64_t seed, double lo = 0.0,
                               double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = u(rng);
  return a;
}

inline FactorModel random_model(GridDims g, Index k, Index r, std::uint64_t seed) {
  std::vector<Field> slfs;
  std::vector<Eigen::VectorXd> psds;
  for (Index i = 0; i < r; ++i) {
    slfs.push_back(uniform(g.m, g.n, seed * 31 + static_cast<std::uint64_t>(i)));
    psds.push_back(uniform(k, 1, seed * 57 + 1000 + static_cast<std::uint64_t>(i)).col(0));
  }
  return FactorModel(std::move(slfs), std::move(psds));
}

/// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rme_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

}  // namespace rme::test
