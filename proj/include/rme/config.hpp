#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rme/denoise.hpp"
#include "rme/solver.hpp"

namespace rme::config {

/// Monte Carlo grid for the bench command.
struct ExperimentGrid {
  Index m = 51;
  Index n = 51;
  Index k = 32;
  Index rank = 6;
  double d_c = 50.0;
  std::vector<double> taus{0.05, 0.10, 0.15, 0.20};
  std::vector<double> sigma_s{6.0};
  /// Empty entries are clean runs.
  std::vector<std::optional<double>> snr_db{std::nullopt};
  std::vector<std::string> methods{"lapnp"};
  int trials = 20;
  std::uint64_t seed = 1;
};

struct Config {
  solver::SolverParams solver;
  denoise::DenoiserSpec denoiser;
  ExperimentGrid experiment;
};

/// Unknown keys and invalid values raise ConfigError naming the key.
Config parse_config(const nlohmann::json& doc);
Config parse_config_text(const std::string& text);
Config load_config(const std::string& path);

nlohmann::json to_json(const Config& cfg);
nlohmann::json to_json(const solver::SolverParams& p);
nlohmann::json to_json(const denoise::DenoiserSpec& spec);

/// "external:<cmd>" for plugins, the kind name otherwise.
std::string denoiser_name(const denoise::DenoiserSpec& spec);

}  // namespace rme::config
