#include "doctest.h"

#include <cmath>
#include <set>

#include "rme/datagen.hpp"
#include "rme/errors.hpp"

using namespace rme;
using namespace rme::datagen;

namespace {

StatModelConfig small_config() {
  StatModelConfig cfg;
  cfg.m = 12;
  cfg.n = 10;
  cfg.k = 16;
  cfg.r = 3;
  return cfg;
}

}  // namespace

TEST_CASE("zero shadowing variance gives an all-zero field") {
  StatModelConfig cfg = small_config();
  cfg.sigma_s = 0.0;
  Rng rng(1);
  CHECK(gen_shadow_field(cfg, rng).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("shadow field variance and correlation match the covariance model") {
  StatModelConfig cfg = small_config();
  cfg.sigma_s = 6.0;
  ShadowFieldSampler sampler({cfg.m, cfg.n}, cfg.sigma_s, cfg.d0, cfg.d_c);
  const auto& cov = sampler.covariance();
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cov).eigenvalues().minCoeff() > 0.0);

  Rng rng(7);
  const int draws = 2000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < draws; ++i) {
    const Field f = sampler.sample(rng);
    const double a = f(2, 3);
    const double b = f(7, 3);  // lag of 5 cells, i.e. 5 * d0 metres
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  const double ma = sa / draws, mb = sb / draws;
  const double va = saa / draws - ma * ma;
  const double vb = sbb / draws - mb * mb;
  const double corr = (sab / draws - ma * mb) / std::sqrt(va * vb);
  CHECK(va == doctest::Approx(36.0).epsilon(0.15));
  CHECK(vb == doctest::Approx(36.0).epsilon(0.15));
  CHECK(std::abs(corr - std::exp(-5.0 * cfg.d0 / cfg.d_c)) <= 0.1);
}

TEST_CASE("path loss without shadowing") {
  StatModelConfig cfg = small_config();
  cfg.sigma_s = 0.0;
  cfg.gamma_min = cfg.gamma_max = 2.0;
  Rng rng(3);
  const Field s = gen_slf(cfg, {0, 0}, rng);
  CHECK(s(2, 0) == doctest::Approx(0.04));
  CHECK(s(0, 0) == doctest::Approx(1.0 / (2.5 * 2.5)));
  CHECK(s(1, 0) == doctest::Approx(1.0 / (2.5 * 2.5)));
}

TEST_CASE("removing the path loss recovers the shadow field") {
  StatModelConfig cfg = small_config();
  Rng rng(5);
  const Field shadow = gen_shadow_field(cfg, rng);
  const Cell e{4, 6};
  const double gamma = 2.3;
  const Field s = slf_from_shadow(shadow, e, cfg.d0, gamma);
  CHECK(s.minCoeff() > 0.0);
  double worst = 0.0;
  for (Index n = 0; n < cfg.n; ++n) {
    for (Index m = 0; m < cfg.m; ++m) {
      const double dist = std::max(std::hypot(double(m - e.m), double(n - e.n)), 1.0);
      const double recovered = std::log10(s(m, n)) + gamma * std::log10(cfg.d0 * dist);
      worst = std::max(worst, std::abs(recovered - shadow(m, n) / 10.0));
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("raised-cosine bump support") {
  const Eigen::VectorXd c = raised_cosine_psd(32, {Bump{10.0, 2, 1.0}});
  for (Index i = 0; i < 32; ++i) {
    if (i >= 8 && i <= 12) {
      CHECK(c(i) > 0.0);
    } else {
      CHECK(c(i) == 0.0);
    }
  }
  CHECK(c(10) == doctest::Approx(1.0));
}

TEST_CASE("spectra are nonnegative and never all zero") {
  Rng rng(11);
  PsdConfig cfg;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd c = gen_psd(32, cfg, rng);
    REQUIRE(c.minCoeff() >= 0.0);
    REQUIRE(c.maxCoeff() > 0.0);
  }
  PsdConfig silent;
  silent.min_amplitude = silent.max_amplitude = 0.0;
  CHECK_THROWS_AS(gen_psd(32, silent, rng), NumericalError);
}

TEST_CASE("sampling mask sizes") {
  Rng rng(2);
  CHECK(sample_mask({51, 51}, 1.0, rng).size() == 2601);
  CHECK(sample_mask({51, 51}, 0.1, rng).size() == 260);
  CHECK_THROWS_AS(sample_mask({3, 3}, 0.01, rng), ArgumentError);
  CHECK_THROWS_AS(sample_mask({3, 3}, 0.0, rng), ArgumentError);
  for (int i = 0; i < 1000; ++i) {
    const SamplingMask mask = sample_mask({9, 7}, 0.3, rng);
    std::set<Index> unique(mask.vec_indices().begin(), mask.vec_indices().end());
    REQUIRE(unique.size() == 19);
  }
}

TEST_CASE("noise calibration") {
  Rng rng(4);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(4, 25);
  y(0, 0) = 10.0;  // |X|_F^2 = 100
  const RadioMap x(5, 5, y);

  const NoisyMap clean = add_noise(x, NoiseSpec::clean(), rng);
  CHECK(clean.v.frobenius_norm() == 0.0);
  CHECK(clean.y.matricized() == x.matricized());

  const NoisyMap noisy = add_noise(x, NoiseSpec::snr(10.0), rng);
  CHECK(noisy.v.matricized().squaredNorm() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK((noisy.y.matricized() - x.matricized() - noisy.v.matricized()).norm() <= 1e-14 * x.frobenius_norm());

  for (double snr : {-5.0, 0.0, 3.7, 20.0}) {
    const RadioMap r(3, 4, Eigen::MatrixXd::Random(6, 12).cwiseAbs());
    const NoisyMap out = add_noise(r, NoiseSpec::snr(snr), rng);
    const double achieved =
        10.0 * std::log10(r.matricized().squaredNorm() / out.v.matricized().squaredNorm());
    CHECK(std::abs(achieved - snr) <= 1e-9);
  }
  CHECK_THROWS_AS(add_noise(RadioMap(2, 2, 2), NoiseSpec::snr(10.0), rng), ArgumentError);
}

TEST_CASE("generation is deterministic and valid") {
  StatModelConfig cfg = small_config();
  cfg.seed = 42;
  const SyntheticMap a = generate(cfg);
  const SyntheticMap b = generate(cfg);
  CHECK(a.map.matricized() == b.map.matricized());
  CHECK(a.map.is_nonnegative());
  for (const Field& s : a.truth.slfs()) CHECK(s.minCoeff() > 0.0);
  CHECK(a.emitters.size() == 3);
  cfg.seed = 43;
  CHECK(generate(cfg).map.matricized() != a.map.matricized());
}

TEST_CASE("emitters keep their minimum separation when the grid allows it") {
  StatModelConfig cfg;
  cfg.r = 6;
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const auto e = place_emitters(cfg, rng);
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j)
        REQUIRE(std::hypot(double(e[i].m - e[j].m), double(e[i].n - e[j].n)) >= 5.0);
  }
}

TEST_CASE("invalid generator settings are rejected") {
  StatModelConfig cfg = small_config();
  cfg.d_c = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = small_config();
  cfg.gamma_max = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  CHECK_THROWS_AS(ShadowFieldSampler({65, 64}, 1.0, 2.5, 50.0), ArgumentError);
}
