#include "rme/config.hpp"

#include <cmath>
#include <set>

#include "rme/errors.hpp"
#include "rme/tensor_io.hpp"

namespace rme::config {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& prefix) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(prefix + it.key(), "unknown key");
  }
}

json object_at(const json& doc, const std::string& key, const std::string& path) {
  if (!doc.contains(key)) return json::object();
  const json& v = doc.at(key);
  if (!v.is_object()) throw ConfigError(path, "expected an object");
  return v;
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& path, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) {
        out = v.get<T>();
      } else if (v.get<long long>() >= 0) {
        out = static_cast<T>(v.get<long long>());
      } else {
        throw ConfigError(path, "expected a nonnegative integer");
      }
    } else {
      out = v.get<T>();
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(path, "expected a number");
    out = v.get<T>();
    if (!std::isfinite(out)) throw ConfigError(path, "must be finite");
  } else {
    if (!v.is_string()) throw ConfigError(path, "expected a string");
    out = v.get<std::string>();
  }
}

std::vector<double> read_numbers(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(path, "expected a nonempty array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// Runs `check` and rethrows its domain error as a ConfigError for `path`.
template <typename F>
void validated(const std::string& path, F&& check) {
  try {
    check();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

solver::SolverParams parse_solver(const json& doc) {
  solver::SolverParams p;
  read(doc, "lambda", "lambda", p.lambda);
  read(doc, "zeta", "zeta", p.zeta);
  read(doc, "rho0", "rho0", p.rho0);
  read(doc, "eta", "eta", p.eta);
  read(doc, "gamma_rho", "gamma_rho", p.gamma_rho);
  read(doc, "j_inner", "j_inner", p.j_inner);
  read(doc, "max_iter", "max_iter", p.max_iter);
  read(doc, "tol", "tol", p.tol);
  read(doc, "divergence_threshold", "divergence_threshold", p.divergence_threshold);
  // Name the first offending key rather than the whole block.
  const std::pair<const char*, bool> checks[] = {
      {"lambda", p.lambda >= 0.0},
      {"zeta", p.zeta > 0.0},
      {"rho0", p.rho0 > 0.0},
      {"eta", p.eta > 0.0 && p.eta <= 1.0},
      {"gamma_rho", p.gamma_rho > 1.0},
      {"j_inner", p.j_inner >= 1},
      {"max_iter", p.max_iter >= 1},
      {"tol", p.tol >= 0.0},
      {"divergence_threshold", p.divergence_threshold > 0.0},
  };
  for (const auto& [key, ok] : checks) {
    if (!ok) throw ConfigError(key, "value outside its valid range");
  }
  validated("solver", [&] { p.validate(); });
  return p;
}

denoise::DenoiserSpec parse_denoiser(const json& obj) {
  reject_unknown(obj,
                 {"kind", "box_radius", "gaussian_bandwidth", "gaussian_radius", "patch_radius", "search_radius",
                  "h_scale", "freeze_after", "spectral_shift", "log_wrap"},
                 "denoiser.");
  denoise::DenoiserSpec spec;
  if (obj.contains("kind")) {
    std::string kind;
    read(obj, "kind", "denoiser.kind", kind);
    validated("denoiser.kind", [&] { spec = denoise::DenoiserSpec::parse(kind); });
  }
  read(obj, "box_radius", "denoiser.box_radius", spec.box_radius);
  read(obj, "gaussian_bandwidth", "denoiser.gaussian_bandwidth", spec.gaussian_bandwidth);
  read(obj, "gaussian_radius", "denoiser.gaussian_radius", spec.gaussian_radius);
  read(obj, "patch_radius", "denoiser.patch_radius", spec.patch_radius);
  read(obj, "search_radius", "denoiser.search_radius", spec.search_radius);
  read(obj, "h_scale", "denoiser.h_scale", spec.h_scale);
  read(obj, "freeze_after", "denoiser.freeze_after", spec.freeze_after);
  read(obj, "spectral_shift", "denoiser.spectral_shift", spec.spectral_shift);
  read(obj, "log_wrap", "denoiser.log_wrap", spec.log_wrap);
  validated("denoiser", [&] { spec.validate(); });
  return spec;
}

ExperimentGrid parse_experiment(const json& obj) {
  reject_unknown(obj, {"m", "n", "k", "rank", "d_c", "taus", "sigma_s", "snr_db", "methods", "trials", "seed"},
                 "experiment.");
  ExperimentGrid g;
  read(obj, "m", "experiment.m", g.m);
  read(obj, "n", "experiment.n", g.n);
  read(obj, "k", "experiment.k", g.k);
  read(obj, "rank", "experiment.rank", g.rank);
  read(obj, "d_c", "experiment.d_c", g.d_c);
  read(obj, "trials", "experiment.trials", g.trials);
  read(obj, "seed", "experiment.seed", g.seed);
  if (obj.contains("taus")) g.taus = read_numbers(obj.at("taus"), "experiment.taus");
  if (obj.contains("sigma_s")) g.sigma_s = read_numbers(obj.at("sigma_s"), "experiment.sigma_s");
  if (obj.contains("snr_db")) {
    const json& v = obj.at("snr_db");
    if (!v.is_array() || v.empty()) throw ConfigError("experiment.snr_db", "expected a nonempty array");
    g.snr_db.clear();
    for (const auto& e : v) {
      if (e.is_string() && e.get<std::string>() == "clean") {
        g.snr_db.emplace_back(std::nullopt);
      } else if (e.is_number() && std::isfinite(e.get<double>())) {
        g.snr_db.emplace_back(e.get<double>());
      } else {
        throw ConfigError("experiment.snr_db", "entries must be numbers or \"clean\"");
      }
    }
  }
  if (obj.contains("methods")) {
    const json& v = obj.at("methods");
    if (!v.is_array() || v.empty()) throw ConfigError("experiment.methods", "expected a nonempty array");
    g.methods.clear();
    for (const auto& e : v) {
      if (!e.is_string() || (e != "lapnp" && e != "dapnp")) {
        throw ConfigError("experiment.methods", "entries must be \"lapnp\" or \"dapnp\"");
      }
      g.methods.push_back(e.get<std::string>());
    }
  }
  if (g.m < 1) throw ConfigError("experiment.m", "must be positive");
  if (g.n < 1) throw ConfigError("experiment.n", "must be positive");
  if (g.k < 4) throw ConfigError("experiment.k", "must be at least 4");
  if (g.rank < 1) throw ConfigError("experiment.rank", "must be positive");
  if (!(g.d_c > 0.0)) throw ConfigError("experiment.d_c", "must be positive");
  if (g.trials < 1) throw ConfigError("experiment.trials", "must be positive");
  for (double t : g.taus) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("experiment.taus", "entries must lie in (0, 1]");
  }
  for (double s : g.sigma_s) {
    if (!(s >= 0.0)) throw ConfigError("experiment.sigma_s", "entries must be nonnegative");
  }
  return g;
}

}  // namespace

Config parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("<root>", "expected a JSON object");
  reject_unknown(doc,
                 {"lambda", "zeta", "rho0", "eta", "gamma_rho", "j_inner", "max_iter", "tol", "divergence_threshold",
                  "denoiser", "experiment"},
                 "");
  Config cfg;
  cfg.solver = parse_solver(doc);
  cfg.denoiser = parse_denoiser(object_at(doc, "denoiser", "denoiser"));
  cfg.experiment = parse_experiment(object_at(doc, "experiment", "experiment"));
  return cfg;
}

Config parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

Config load_config(const std::string& path) { return parse_config_text(io::read_text(path)); }

std::string denoiser_name(const denoise::DenoiserSpec& spec) {
  if (spec.kind == denoise::Kind::external) return "external:" + spec.command;
  return denoise::to_string(spec.kind);
}

json to_json(const solver::SolverParams& p) {
  return {{"lambda", p.lambda}, {"zeta", p.zeta},       {"rho0", p.rho0},         {"eta", p.eta},
          {"gamma_rho", p.gamma_rho}, {"j_inner", p.j_inner}, {"max_iter", p.max_iter}, {"tol", p.tol},
          {"divergence_threshold", p.divergence_threshold}};
}

json to_json(const denoise::DenoiserSpec& spec) {
  return {{"kind", denoiser_name(spec)},
          {"box_radius", spec.box_radius},
          {"gaussian_bandwidth", spec.gaussian_bandwidth},
          {"gaussian_radius", spec.gaussian_radius},
          {"patch_radius", spec.patch_radius},
          {"search_radius", spec.search_radius},
          {"h_scale", spec.h_scale},
          {"freeze_after", spec.freeze_after},
          {"spectral_shift", spec.spectral_shift},
          {"log_wrap", spec.log_wrap}};
}

json to_json(const Config& cfg) {
  json doc = to_json(cfg.solver);
  doc["denoiser"] = to_json(cfg.denoiser);
  const auto& g = cfg.experiment;
  json snr = json::array();
  for (const auto& s : g.snr_db) snr.push_back(s ? json(*s) : json("clean"));
  doc["experiment"] = {{"m", g.m},       {"n", g.n},           {"k", g.k},          {"rank", g.rank},
                       {"d_c", g.d_c},   {"taus", g.taus},     {"sigma_s", g.sigma_s}, {"snr_db", snr},
                       {"methods", g.methods}, {"trials", g.trials}, {"seed", g.seed}};
  return doc;
}

}  // namespace rme::config
