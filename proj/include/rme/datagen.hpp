#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "rme/core.hpp"

namespace rme::datagen {

using Rng = std::mt19937_64;

struct PsdConfig {
  int min_bumps = 2;
  int max_bumps = 4;
  int min_half_width = 2;
  int max_half_width = 6;
  double min_amplitude = 0.5;
  double max_amplitude = 2.0;
};

struct StatModelConfig {
  Index m = 51;
  Index n = 51;
  Index k = 32;
  Index r = 6;
  double d0 = 2.5;
  double gamma_min = 2.0;
  double gamma_max = 2.5;
  double sigma_s = 6.0;
  double d_c = 50.0;
  PsdConfig psd;
  std::uint64_t seed = 1;
  /// Minimum pairwise emitter separation in grid units.
  double min_separation = 5.0;

  void validate() const;
};

/// Draws zero-mean Gaussian fields with exponential covariance
/// sigma_s^2 exp(-d0 |p1 - p2| / d_c) by dense Cholesky of the covariance.
/// The factor is computed once and reused for every draw.
class ShadowFieldSampler {
 public:
  static constexpr Index kMaxCells = 64 * 64;

  ShadowFieldSampler(GridDims dims, double sigma_s, double d0, double d_c);

  Field sample(Rng& rng) const;
  GridDims dims() const noexcept { return dims_; }
  /// Covariance matrix used for the factorization (jitter included).
  const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

 private:
  GridDims dims_;
  double sigma_s_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
};

Field gen_shadow_field(const StatModelConfig& cfg, Rng& rng);

/// Log-distance path loss with log-normal shadowing. Distance is clamped to
/// one grid unit at the emitter cell.
Field slf_from_shadow(const Field& shadow_db, Cell emitter, double d0, double gamma);
Field gen_slf(const StatModelConfig& cfg, Cell emitter, Rng& rng, double* gamma_out = nullptr);
Field gen_slf(const ShadowFieldSampler& sampler, const StatModelConfig& cfg, Cell emitter, Rng& rng,
              double* gamma_out = nullptr);

struct Bump {
  double center = 0.0;
  int half_width = 0;
  double amplitude = 0.0;
};

/// Raised-cosine bump, nonzero exactly on |k - center| <= half_width.
Eigen::VectorXd raised_cosine_psd(Index k, const std::vector<Bump>& bumps);
Eigen::VectorXd gen_psd(Index k, const PsdConfig& cfg, Rng& rng);

SamplingMask sample_mask(GridDims dims, double tau, Rng& rng);

struct NoiseSpec {
  /// Empty means clean (no noise).
  std::optional<double> snr_db;
  static NoiseSpec clean() { return {}; }
  static NoiseSpec snr(double db) { return {db}; }
};

struct NoisyMap {
  RadioMap y;
  RadioMap v;
};

/// White Gaussian noise scaled after the draw so the realized SNR equals
/// the requested one.
NoisyMap add_noise(const RadioMap& x, const NoiseSpec& spec, Rng& rng);

std::vector<Cell> place_emitters(const StatModelConfig& cfg, Rng& rng);

struct SyntheticMap {
  FactorModel truth;
  RadioMap map;
  std::vector<Cell> emitters;
  std::vector<double> gammas;
};

/// Full statistical-model draw. Passing a sampler built for the same
/// configuration skips the covariance factorization.
SyntheticMap generate(const StatModelConfig& cfg, const ShadowFieldSampler* sampler = nullptr);

/// Combines externally supplied loss fields with generated spectra.
SyntheticMap generate_from_slfs(std::vector<Field> slfs, Index k, const PsdConfig& psd, std::uint64_t seed);

}  // namespace rme::datagen
