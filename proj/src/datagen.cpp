#include "rme/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rme/errors.hpp"

namespace rme::datagen {

void StatModelConfig::validate() const {
  if (m < 1 || n < 1 || k < 1) throw ArgumentError("dims must be >= 1");
  if (r < 1) throw ArgumentError("emitter count must be >= 1");
  if (!(d0 > 0.0)) throw ArgumentError("d0 must be positive");
  if (!(d_c > 0.0)) throw ArgumentError("d_c must be positive");
  if (!(sigma_s >= 0.0)) throw ArgumentError("sigma_s must be nonnegative");
  if (!(gamma_min > 0.0) || !(gamma_max >= gamma_min) || !std::isfinite(gamma_max)) {
    throw ArgumentError("path-loss exponent range must lie in (0, inf)");
  }
}

ShadowFieldSampler::ShadowFieldSampler(GridDims dims, double sigma_s, double d0, double d_c)
    : dims_(dims), sigma_s_(sigma_s) {
  const Index cells = dims.cells();
  if (cells < 1 || cells > kMaxCells) {
    throw ArgumentError("exact shadow-field sampling supports grids up to 64x64");
  }
  if (sigma_s == 0.0) return;
  const double var = sigma_s * sigma_s;
  cov_.resize(cells, cells);
  for (Index j = 0; j < cells; ++j) {
    const Cell a = vec_coords(j, dims);
    for (Index i = j; i < cells; ++i) {
      const Cell b = vec_coords(i, dims);
      const double dist = std::hypot(static_cast<double>(a.m - b.m), static_cast<double>(a.n - b.n));
      const double v = var * std::exp(-d0 * dist / d_c);
      cov_(i, j) = v;
      cov_(j, i) = v;
    }
  }
  cov_.diagonal().array() += 1e-10 * var;
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("shadow-field covariance is not positive definite after jitter");
  }
  chol_ = llt.matrixL();
}

Field ShadowFieldSampler::sample(Rng& rng) const {
  if (sigma_s_ == 0.0) return Field::Zero(dims_.m, dims_.n);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd g(dims_.cells());
  for (Index i = 0; i < g.size(); ++i) g(i) = gauss(rng);
  Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>() * g;
  return unvec(v, dims_);
}

Field gen_shadow_field(const StatModelConfig& cfg, Rng& rng) {
  cfg.validate();
  return ShadowFieldSampler({cfg.m, cfg.n}, cfg.sigma_s, cfg.d0, cfg.d_c).sample(rng);
}

Field slf_from_shadow(const Field& shadow_db, Cell emitter, double d0, double gamma) {
  const GridDims g{shadow_db.rows(), shadow_db.cols()};
  vec_index(emitter.m, emitter.n, g);
  Field s(g.m, g.n);
  for (Index n = 0; n < g.n; ++n) {
    for (Index m = 0; m < g.m; ++m) {
      const double dist = std::max(
          std::hypot(static_cast<double>(m - emitter.m), static_cast<double>(n - emitter.n)), 1.0);
      s(m, n) = std::pow(10.0, shadow_db(m, n) / 10.0) / std::pow(d0 * dist, gamma);
    }
  }
  return s;
}

Field gen_slf(const ShadowFieldSampler& sampler, const StatModelConfig& cfg, Cell emitter, Rng& rng,
              double* gamma_out) {
  std::uniform_real_distribution<double> gamma_dist(cfg.gamma_min, cfg.gamma_max);
  const double gamma = cfg.gamma_max > cfg.gamma_min ? gamma_dist(rng) : cfg.gamma_min;
  if (gamma_out) *gamma_out = gamma;
  return slf_from_shadow(sampler.sample(rng), emitter, cfg.d0, gamma);
}

Field gen_slf(const StatModelConfig& cfg, Cell emitter, Rng& rng, double* gamma_out) {
  cfg.validate();
  ShadowFieldSampler sampler({cfg.m, cfg.n}, cfg.sigma_s, cfg.d0, cfg.d_c);
  return gen_slf(sampler, cfg, emitter, rng, gamma_out);
}

Eigen::VectorXd raised_cosine_psd(Index k, const std::vector<Bump>& bumps) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(k);
  for (const auto& b : bumps) {
    const double width = static_cast<double>(b.half_width) + 1.0;
    for (Index i = 0; i < k; ++i) {
      const double off = static_cast<double>(i) - b.center;
      if (std::abs(off) <= b.half_width) {
        c(i) += b.amplitude * 0.5 * (1.0 + std::cos(std::numbers::pi * off / width));
      }
    }
  }
  return c;
}

Eigen::VectorXd gen_psd(Index k, const PsdConfig& cfg, Rng& rng) {
  if (k < 4) throw ArgumentError("PSD generation needs at least 4 bins");
  std::uniform_int_distribution<int> count_dist(cfg.min_bumps, cfg.max_bumps);
  std::uniform_int_distribution<Index> center_dist(0, k - 1);
  std::uniform_int_distribution<int> width_dist(cfg.min_half_width, cfg.max_half_width);
  std::uniform_real_distribution<double> amp_dist(cfg.min_amplitude, cfg.max_amplitude);
  // Redraw in the (configuration-dependent) event of an all-zero spectrum.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Bump> bumps(static_cast<std::size_t>(count_dist(rng)));
    for (auto& b : bumps) {
      b.center = static_cast<double>(center_dist(rng));
      b.half_width = width_dist(rng);
      b.amplitude = amp_dist(rng);
    }
    Eigen::VectorXd c = raised_cosine_psd(k, bumps);
    if (c.maxCoeff() > 0.0) return c;
  }
  throw NumericalError("PSD configuration only produces all-zero spectra");
}

SamplingMask sample_mask(GridDims dims, double tau, Rng& rng) {
  if (!(tau > 0.0) || tau > 1.0) throw ArgumentError("sampling rate must lie in (0, 1]");
  const auto count = static_cast<Index>(std::llround(tau * static_cast<double>(dims.cells())));
  if (count < 1) throw ArgumentError("sampling rate selects no cells on this grid");
  std::vector<Index> all(static_cast<std::size_t>(dims.cells()));
  for (Index j = 0; j < dims.cells(); ++j) all[static_cast<std::size_t>(j)] = j;
  // Partial Fisher-Yates: the first `count` slots are a uniform draw without replacement.
  for (Index i = 0; i < count; ++i) {
    std::uniform_int_distribution<Index> pick(i, dims.cells() - 1);
    std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(pick(rng))]);
  }
  all.resize(static_cast<std::size_t>(count));
  return SamplingMask::from_linear(dims, std::move(all));
}

NoisyMap add_noise(const RadioMap& x, const NoiseSpec& spec, Rng& rng) {
  const double signal = x.matricized().squaredNorm();
  if (!(signal > 0.0)) throw ArgumentError("cannot add SNR-calibrated noise to an all-zero map");
  if (!spec.snr_db) {
    return {x, RadioMap(x.rows(), x.cols(), x.bins())};
  }
  if (!std::isfinite(*spec.snr_db)) throw ArgumentError("SNR must be finite");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd v(x.bins(), x.grid().cells());
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = gauss(rng);
  const double target = signal / std::pow(10.0, *spec.snr_db / 10.0);
  v *= std::sqrt(target / v.squaredNorm());
  Eigen::MatrixXd y = x.matricized() + v;
  return {RadioMap(x.rows(), x.cols(), std::move(y)), RadioMap(x.rows(), x.cols(), std::move(v))};
}

std::vector<Cell> place_emitters(const StatModelConfig& cfg, Rng& rng) {
  std::uniform_int_distribution<Index> row(0, cfg.m - 1);
  std::uniform_int_distribution<Index> col(0, cfg.n - 1);
  std::vector<Cell> out;
  for (Index r = 0; r < cfg.r; ++r) {
    Cell cand{};
    for (int attempt = 0; attempt < 100; ++attempt) {
      cand = {row(rng), col(rng)};
      const bool clear = std::all_of(out.begin(), out.end(), [&](const Cell& o) {
        return std::hypot(static_cast<double>(o.m - cand.m), static_cast<double>(o.n - cand.n)) >=
               cfg.min_separation;
      });
      if (clear) break;
    }
    out.push_back(cand);
  }
  return out;
}

SyntheticMap generate(const StatModelConfig& cfg, const ShadowFieldSampler* sampler) {
  cfg.validate();
  std::optional<ShadowFieldSampler> own;
  if (sampler == nullptr || !(sampler->dims() == GridDims{cfg.m, cfg.n})) {
    own.emplace(GridDims{cfg.m, cfg.n}, cfg.sigma_s, cfg.d0, cfg.d_c);
    sampler = &*own;
  }
  Rng rng(cfg.seed);
  auto emitters = place_emitters(cfg, rng);
  std::vector<Field> slfs;
  std::vector<Eigen::VectorXd> psds;
  std::vector<double> gammas;
  for (Index r = 0; r < cfg.r; ++r) {
    double gamma = 0.0;
    slfs.push_back(gen_slf(*sampler, cfg, emitters[static_cast<std::size_t>(r)], rng, &gamma));
    gammas.push_back(gamma);
    psds.push_back(gen_psd(cfg.k, cfg.psd, rng));
  }
  FactorModel truth(std::move(slfs), std::move(psds));
  RadioMap map = compose(truth);
  return {std::move(truth), std::move(map), std::move(emitters), std::move(gammas)};
}

SyntheticMap generate_from_slfs(std::vector<Field> slfs, Index k, const PsdConfig& psd,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> psds;
  for (std::size_t r = 0; r < slfs.size(); ++r) psds.push_back(gen_psd(k, psd, rng));
  FactorModel truth(std::move(slfs), std::move(psds));
  RadioMap map = compose(truth);
  return {std::move(truth), std::move(map), {}, {}};
}

}  // namespace rme::datagen
