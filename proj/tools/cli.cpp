#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "rme/analysis.hpp"
#include "rme/config.hpp"
#include "rme/datagen.hpp"
#include "rme/errors.hpp"
#include "rme/metrics.hpp"
#include "rme/render.hpp"
#include "rme/solver.hpp"
#include "rme/tensor_io.hpp"

namespace rme::cli {

namespace fs = std::filesystem;
using nlohmann::json;

unsigned thread_budget() {
  if (const char* env = std::getenv("RME_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ArgumentError("RME_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

void write_json(const fs::path& path, const json& doc) { io::write_file_atomic(path, doc.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

RadioMap stack_columns(const Eigen::MatrixXd& cols, GridDims grid) {
  std::vector<Field> fields;
  for (Index r = 0; r < cols.cols(); ++r) fields.push_back(unvec(cols.col(r), grid));
  return io::fields_as_slices(fields);
}

RadioMap stack_vectors(const Eigen::MatrixXd& cols) {
  std::vector<Field> fields;
  for (Index r = 0; r < cols.cols(); ++r) fields.push_back(Field(cols.col(r)));
  return io::fields_as_slices(fields);
}

Eigen::MatrixXd unstack(const RadioMap& stack) {
  const auto fields = io::slices_as_fields(stack);
  Eigen::MatrixXd out(stack.rows() * stack.cols(), static_cast<Index>(fields.size()));
  for (std::size_t r = 0; r < fields.size(); ++r) out.col(static_cast<Index>(r)) = vec(fields[r]);
  return out;
}

json emitters_json(const std::vector<Cell>& cells) {
  json arr = json::array();
  for (const auto& c : cells) arr.push_back({c.m, c.n});
  return arr;
}

config::Config config_or_default(const std::string& path) {
  return path.empty() ? config::Config{} : config::load_config(path);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string config, out_dir, slfs;
  std::uint64_t seed = 1;
  Index rank = 0;
  double sigma_s = -1.0;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto cfg = config_or_default(a.config);
  datagen::StatModelConfig sm;
  sm.m = cfg.experiment.m;
  sm.n = cfg.experiment.n;
  sm.k = cfg.experiment.k;
  sm.r = a.rank > 0 ? a.rank : cfg.experiment.rank;
  sm.d_c = cfg.experiment.d_c;
  sm.sigma_s = a.sigma_s >= 0.0 ? a.sigma_s : cfg.experiment.sigma_s.front();
  sm.seed = a.seed;

  json sidecar;
  if (!a.slfs.empty()) sidecar["slf_source"] = fs::absolute(a.slfs).string();
  const datagen::SyntheticMap syn =
      a.slfs.empty() ? datagen::generate(sm)
                     : datagen::generate_from_slfs(io::slices_as_fields(io::read_rmt1(a.slfs)), sm.k, sm.psd, a.seed);
  sidecar["config"] = config::to_json(cfg);
  sidecar["model"] = {{"m", sm.m}, {"n", sm.n}, {"k", sm.k}, {"r", syn.truth.rank()}, {"d0", sm.d0},
                      {"sigma_s", sm.sigma_s}, {"d_c", sm.d_c}};
  sidecar["seed"] = a.seed;
  sidecar["emitter_locs"] = emitters_json(syn.emitters);
  sidecar["gammas"] = syn.gammas;

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  io::write_rmt1(dir / "truth.rmt", syn.map);
  io::write_rmt1(dir / "slfs.rmt", stack_columns(syn.truth.slf_matrix(), syn.map.grid()));
  io::write_rmt1(dir / "psds.rmt", stack_vectors(syn.truth.psd_matrix()));
  write_json(dir / "truth.json", sidecar);
  out << "wrote " << (dir / "truth.rmt").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string input, out_dir;
  double tau = 0.1;
  std::optional<double> snr;
  std::uint64_t seed = 1;
};

int cmd_sample(const SampleArgs& a, std::ostream& out) {
  const RadioMap truth = io::read_rmt1(a.input);
  datagen::Rng rng(a.seed);
  const SamplingMask mask = datagen::sample_mask(truth.grid(), a.tau, rng);
  const auto noisy = datagen::add_noise(truth, a.snr ? datagen::NoiseSpec::snr(*a.snr) : datagen::NoiseSpec::clean(), rng);

  // Unobserved cells are zeroed so the file never carries unsampled truth.
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(truth.bins(), truth.grid().cells());
  for (Index j : mask.vec_indices()) y.col(j) = noisy.y.matricized().col(j);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  io::write_mask(dir / "mask.json", mask);
  io::write_rmt1(dir / "observed.rmt", RadioMap(truth.rows(), truth.cols(), y));
  io::write_rmt1(dir / "noise.rmt", noisy.v);
  write_json(dir / "sample.json", {{"input", fs::absolute(a.input).string()},
                                   {"tau", a.tau},
                                   {"snr_db", a.snr ? json(*a.snr) : json("clean")},
                                   {"seed", a.seed},
                                   {"observed_cells", mask.size()}});
  out << "sampled " << mask.size() << " cells\n";
  return 0;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string input, mask, config, method = "lapnp", denoiser, out_dir;
  Index rank = 0;
};

denoise::DenoiserSpec resolve_denoiser(const config::Config& cfg, const std::string& flag) {
  denoise::DenoiserSpec spec = cfg.denoiser;
  if (!flag.empty()) {
    const auto parsed = denoise::DenoiserSpec::parse(flag);
    spec.kind = parsed.kind;
    spec.command = parsed.command;
    spec.log_wrap = parsed.log_wrap;
  }
  spec.validate();
  return spec;
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const auto cfg = config_or_default(a.config);
  const auto spec = resolve_denoiser(cfg, a.denoiser);
  const Index rank = a.rank > 0 ? a.rank : cfg.experiment.rank;
  const RadioMap observed = io::read_rmt1(a.input);
  const SamplingMask mask = io::read_mask(a.mask, observed.grid());

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  json sidecar{{"input", fs::absolute(a.input).string()},
               {"mask", fs::absolute(a.mask).string()},
               {"config", config::to_json(cfg)},
               {"method", a.method},
               {"denoiser", config::to_json(spec)},
               {"rank", rank}};

  std::vector<solver::IterationRecord> log;
  RadioMap estimate;
  const auto t0 = std::chrono::steady_clock::now();
  if (a.method == "lapnp") {
    const auto res = solver::lapnp_solve(restrict(observed, mask), rank, cfg.solver, spec);
    estimate = res.estimate;
    log = res.log;
    const GridDims grid = observed.grid();
    io::write_rmt1(dir / "slfs.rmt", stack_columns(res.factors.slf_matrix(), grid));
    io::write_rmt1(dir / "psds.rmt", stack_vectors(res.factors.psd_matrix()));
    io::write_rmt1(dir / "state_s.rmt", stack_columns(res.state.s, grid));
    io::write_rmt1(dir / "state_z.rmt", stack_columns(res.state.z, grid));
    io::write_rmt1(dir / "state_psi.rmt", stack_columns(res.state.psi, grid));
    io::write_rmt1(dir / "state_c.rmt", stack_vectors(res.state.c));
    sidecar["rho"] = res.state.rho;
    sidecar["converged"] = res.converged;
    sidecar["iterations"] = res.iterations;
  } else if (a.method == "dapnp") {
    const auto res = solver::dapnp_solve(observed, mask, cfg.solver, spec);
    estimate = res.estimate;
    log = res.log;
    sidecar["converged"] = res.converged;
    sidecar["iterations"] = res.iterations;
  } else {
    throw ArgumentError("unknown method '" + a.method + "'");
  }
  sidecar["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream log_text;
  solver::write_run_log(log_text, log);
  io::write_file_atomic(dir / "run_log.jsonl", log_text.str());
  io::write_rmt1(dir / "estimate.rmt", estimate);
  write_json(dir / "solve.json", sidecar);
  out << a.method << ": " << sidecar["iterations"] << " iterations, converged=" << sidecar["converged"] << '\n';
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string input, truth, out_dir, method = "estimate";
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const RadioMap est = io::read_rmt1(a.input);
  const RadioMap truth = io::read_rmt1(a.truth);
  metrics::MetricRow row;
  row.run_id = fs::path(a.input).parent_path().filename().string();
  row.method = a.method;
  row.snr_db = std::nan("");
  row.rse = metrics::rse(est, truth);
  row.mssim = metrics::mssim(est, truth);
  // Pull run context from sibling sidecars when present.
  const fs::path solve_json = fs::path(a.input).parent_path() / "solve.json";
  if (fs::exists(solve_json)) {
    const json s = read_json(solve_json);
    row.seconds = s.value("seconds", 0.0);
    row.iterations = s.value("iterations", 0);
    const fs::path sample_json = fs::path(s.at("input").get<std::string>()).parent_path() / "sample.json";
    if (fs::exists(sample_json)) {
      const json smp = read_json(sample_json);
      row.tau = smp.value("tau", 0.0);
      if (smp.at("snr_db").is_number()) row.snr_db = smp.at("snr_db").get<double>();
    }
  }
  const fs::path truth_json = fs::path(a.truth).parent_path() / "truth.json";
  if (fs::exists(truth_json)) row.sigma_s = read_json(truth_json).at("model").value("sigma_s", 0.0);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  std::ostringstream csv;
  metrics::write_csv_header(csv);
  metrics::write_csv_row(csv, row);
  io::write_file_atomic(dir / "metrics.csv", csv.str());
  out << "rse=" << row.rse << " mssim=" << row.mssim << '\n';
  return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string input, truth, out_dir;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const fs::path solve_dir(a.input);
  const json sc = read_json(solve_dir / "solve.json");
  if (sc.at("method") != "lapnp") throw ArgumentError("analyze needs a lapnp solve directory");
  const auto cfg = config::parse_config(sc.at("config"));
  const auto spec = config::parse_config(json{{"denoiser", sc.at("denoiser")}}).denoiser;
  const RadioMap observed = io::read_rmt1(sc.at("input").get<std::string>());
  const GridDims grid = observed.grid();
  const SamplingMask mask = io::read_mask(sc.at("mask").get<std::string>(), grid);
  const MeasurementSet meas = restrict(observed, mask);
  const solver::LatentProblem problem(meas);

  solver::SolverState st;
  st.s = unstack(io::read_rmt1(solve_dir / "state_s.rmt"));
  st.z = unstack(io::read_rmt1(solve_dir / "state_z.rmt"));
  st.psi = unstack(io::read_rmt1(solve_dir / "state_psi.rmt"));
  st.c = unstack(io::read_rmt1(solve_dir / "state_c.rmt"));
  st.rho = sc.at("rho").get<double>();
  const Index r = st.s.cols();

  json report{{"solve_dir", fs::absolute(solve_dir).string()}, {"rho", st.rho}};
  const double rel_gap = (st.s - st.z).norm() / std::max(st.s.norm(), 1e-300);
  report["s_z_relative_gap"] = rel_gap;

  // Explicit W per emitter. Image-dependent kernels are rebuilt from the
  // final fields at the final noise level.
  std::vector<Eigen::MatrixXd> ws;
  if (spec.linear() && spec.kind != denoise::Kind::identity && grid.cells() <= 4096) {
    const double sigma = std::sqrt(cfg.solver.lambda / st.rho);
    json a1 = json::array();
    for (Index q = 0; q < r; ++q) {
      denoise::SlotDenoiser slot(spec);
      slot(unvec(st.s.col(q), grid), sigma, 1);
      ws.push_back(slot.linear()->dense());
      a1.push_back(analysis::to_json(analysis::verify_assumption1(ws.back())));
    }
    report["assumption1"] = a1;
    try {
      report["kkt"] = analysis::to_json(analysis::kkt_residual(st, problem, ws, cfg.solver.zeta));
    } catch (const UnsupportedDenoiserError& e) {
      report["kkt"] = {{"skipped", e.what()}};
    }
  } else {
    report["assumption1"] = {{"skipped", "needs an explicit linear denoiser on at most 4096 cells"}};
    report["kkt"] = {{"skipped", "needs an explicit linear denoiser on at most 4096 cells"}};
  }

  if (!a.truth.empty()) {
    const fs::path tdir(a.truth);
    const Eigen::MatrixXd s_nat = unstack(io::read_rmt1(tdir / "slfs.rmt"));
    const Eigen::MatrixXd c_nat = unstack(io::read_rmt1(tdir / "psds.rmt"));
    std::vector<Field> slfs;
    std::vector<Eigen::VectorXd> psds;
    for (Index q = 0; q < s_nat.cols(); ++q) {
      slfs.push_back(unvec(s_nat.col(q), grid));
      psds.push_back(c_nat.col(q));
    }
    const FactorModel truth(std::move(slfs), std::move(psds));
    std::optional<RadioMap> noise;
    const fs::path noise_path = fs::path(sc.at("input").get<std::string>()).parent_path() / "noise.rmt";
    if (fs::exists(noise_path)) noise = io::read_rmt1(noise_path);

    if (ws.empty() || grid.cells() * r > 3000 || truth.rank() != r) {
      report["lemma2"] = {{"skipped", "needs explicit W, matching rank and MN * R <= 3000"}};
    } else {
      const auto b = analysis::lemma2_bounds(truth, meas, noise ? &*noise : nullptr, ws, st.c, st.rho, cfg.solver.zeta);
      json lj = analysis::to_json(b);
      lj["c_energy"] = st.c.squaredNorm();
      lj["s_energy"] = st.s.squaredNorm();
      lj["contained"] = st.c.squaredNorm() <= b.alpha && st.s.squaredNorm() <= b.beta;
      const RadioMap truth_map = compose(truth);
      const RadioMap est = io::read_rmt1(solve_dir / "estimate.rmt");
      const double cells_bins = static_cast<double>(grid.cells() * truth_map.bins());
      lj["actual_error"] = (est.matricized() - truth_map.matricized()).norm() / meas.scale() / std::sqrt(cells_bins);
      report["lemma2"] = lj;
    }
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_json(dir / "analysis.json", report);
  out << "wrote " << (dir / "analysis.json").string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string config, out_dir, denoiser;
  int trials = 0;
  std::optional<std::uint64_t> seed;
};

struct BenchJob {
  std::size_t sigma_idx, tau_idx, snr_idx, method_idx;
  int trial;
};

std::string snr_label(const std::optional<double>& snr) {
  if (!snr) return "clean";
  std::ostringstream s;
  s << *snr;
  return s.str();
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  auto cfg = config_or_default(a.config);
  if (a.trials > 0) cfg.experiment.trials = a.trials;
  if (a.seed) cfg.experiment.seed = *a.seed;
  const auto spec = resolve_denoiser(cfg, a.denoiser);
  const auto& g = cfg.experiment;

  std::vector<std::unique_ptr<datagen::ShadowFieldSampler>> samplers;
  for (double s : g.sigma_s) {
    samplers.push_back(std::make_unique<datagen::ShadowFieldSampler>(GridDims{g.m, g.n}, s, 2.5, g.d_c));
  }

  std::vector<BenchJob> jobs;
  for (std::size_t si = 0; si < g.sigma_s.size(); ++si)
    for (std::size_t ti = 0; ti < g.taus.size(); ++ti)
      for (std::size_t ni = 0; ni < g.snr_db.size(); ++ni)
        for (std::size_t mi = 0; mi < g.methods.size(); ++mi)
          for (int t = 0; t < g.trials; ++t) jobs.push_back({si, ti, ni, mi, t});

  std::vector<metrics::MetricRow> rows(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const BenchJob& job = jobs[i];
      // Trial t always sees the same map, mask and noise across tau, SNR
      // and method (paired comparisons).
      const std::uint64_t trial_seed = g.seed + static_cast<std::uint64_t>(job.trial);
      datagen::StatModelConfig sm;
      sm.m = g.m;
      sm.n = g.n;
      sm.k = g.k;
      sm.r = g.rank;
      sm.d_c = g.d_c;
      sm.sigma_s = g.sigma_s[job.sigma_idx];
      sm.seed = trial_seed;
      metrics::MetricRow& row = rows[i];
      row.method = g.methods[job.method_idx] + "-" + config::denoiser_name(spec);
      row.tau = g.taus[job.tau_idx];
      row.sigma_s = sm.sigma_s;
      row.snr_db = g.snr_db[job.snr_idx] ? *g.snr_db[job.snr_idx] : std::nan("");
      row.run_id = "s" + std::to_string(job.sigma_idx) + "-t" + std::to_string(job.tau_idx) + "-n" +
                   std::to_string(job.snr_idx) + "-" + std::to_string(job.trial);
      try {
        const auto syn = datagen::generate(sm, samplers[job.sigma_idx].get());
        datagen::Rng mask_rng(trial_seed * 7919 + 17);
        const SamplingMask mask = datagen::sample_mask(syn.map.grid(), row.tau, mask_rng);
        datagen::Rng noise_rng(trial_seed * 104729 + 29);
        const auto noisy = datagen::add_noise(
            syn.map,
            g.snr_db[job.snr_idx] ? datagen::NoiseSpec::snr(*g.snr_db[job.snr_idx]) : datagen::NoiseSpec::clean(),
            noise_rng);
        const auto t0 = std::chrono::steady_clock::now();
        RadioMap est;
        if (g.methods[job.method_idx] == "lapnp") {
          const auto res = solver::lapnp_solve(restrict(noisy.y, mask), g.rank, cfg.solver, spec);
          est = res.estimate;
          row.iterations = res.iterations;
        } else {
          const auto res = solver::dapnp_solve(noisy.y, mask, cfg.solver, spec);
          est = res.estimate;
          row.iterations = res.iterations;
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.rse = metrics::rse(est, syn.map);
        row.mssim = metrics::mssim(est, syn.map);
      } catch (const std::exception& e) {
        failures[i] = e.what();
        row.rse = row.mssim = std::nan("");
      }
    }
  };
  const unsigned workers = std::min<unsigned>(thread_budget(), static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  metrics::write_csv_header(csv);
  for (const auto& row : rows) metrics::write_csv_row(csv, row);

  // Aggregate: one line per (sigma_s, tau, snr, method), means over trials.
  struct Acc {
    double rse = 0, mssim = 0, seconds = 0;
    int count = 0, failed = 0;
  };
  std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, Acc> acc;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& e = acc[{jobs[i].sigma_idx, jobs[i].tau_idx, jobs[i].snr_idx, jobs[i].method_idx}];
    if (!failures[i].empty()) {
      ++e.failed;
      continue;
    }
    e.rse += rows[i].rse;
    e.mssim += rows[i].mssim;
    e.seconds += rows[i].seconds;
    ++e.count;
  }
  std::ostringstream agg;
  agg.precision(10);
  agg << "sigma_s,tau,snr,method,trials,failed,mean_rse,mean_mssim,mean_seconds\n";
  for (const auto& [key, e] : acc) {
    const auto [si, ti, ni, mi] = key;
    const double n = e.count > 0 ? e.count : std::nan("");
    agg << g.sigma_s[si] << ',' << g.taus[ti] << ',' << snr_label(g.snr_db[ni]) << ',' << g.methods[mi] << '-'
        << config::denoiser_name(spec) << ',' << e.count << ',' << e.failed << ',' << e.rse / n << ',' << e.mssim / n
        << ',' << e.seconds / n << '\n';
  }

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  io::write_file_atomic(dir / "rows.csv", csv.str());
  io::write_file_atomic(dir / "aggregate.csv", agg.str());
  json failed = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!failures[i].empty()) failed.push_back({{"run_id", rows[i].run_id}, {"error", failures[i]}});
  }
  write_json(dir / "bench.json", {{"config", config::to_json(cfg)}, {"denoiser", config::to_json(spec)},
                                  {"workers", workers}, {"failures", failed}});
  out << "bench: " << jobs.size() << " runs, " << failed.size() << " failed\n";
  return failed.empty() ? 0 : 1;
}

// ---------------------------------------------------------------- render

struct RenderArgs {
  std::string input, out_dir;
  Index band = 0;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const RadioMap x = io::read_rmt1(a.input);
  if (a.band < 0 || a.band >= x.bins()) throw RangeError("band out of range");
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  const fs::path path = dir / (fs::path(a.input).stem().string() + "_band" + std::to_string(a.band) + ".png");
  render::render_heatmap(x.band(a.band), path);
  out << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radio map estimation with latent-domain plug-and-play ADMM", "rme"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic radio map");
  g->add_option("--config", gen.config, "JSON config (experiment block)");
  g->add_option("--seed", gen.seed, "RNG seed");
  g->add_option("--rank", gen.rank, "Number of emitters");
  g->add_option("--sigma-s", gen.sigma_s, "Shadowing std in dB");
  g->add_option("--slfs", gen.slfs, "Import loss fields from an M x N x R RMT1 stack");
  g->add_option("--out-dir", gen.out_dir)->required();

  SampleArgs smp;
  auto* s = app.add_subcommand("sample", "Draw a sampling mask and noisy observations");
  s->add_option("--input", smp.input, "Ground-truth tensor")->required();
  s->add_option("--tau", smp.tau, "Sampling rate in (0, 1]");
  s->add_option("--snr", smp.snr, "SNR in dB (omit for clean)");
  s->add_option("--seed", smp.seed, "RNG seed");
  s->add_option("--out-dir", smp.out_dir)->required();

  SolveArgs sol;
  auto* v = app.add_subcommand("solve", "Estimate the full map from samples");
  v->add_option("--input", sol.input, "Observed tensor")->required();
  v->add_option("--mask", sol.mask, "Mask JSON")->required();
  v->add_option("--config", sol.config, "JSON config");
  v->add_option("--method", sol.method)->check(CLI::IsMember({"lapnp", "dapnp"}));
  v->add_option("--denoiser", sol.denoiser, "identity, box, gaussian, nlm, dsg-nlm or external:<cmd>");
  v->add_option("--rank", sol.rank, "Number of emitters");
  v->add_option("--out-dir", sol.out_dir)->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score an estimate against the truth");
  e->add_option("--input", ev.input, "Estimated tensor")->required();
  e->add_option("--truth", ev.truth, "Ground-truth tensor")->required();
  e->add_option("--method", ev.method, "Label for the CSV row");
  e->add_option("--out-dir", ev.out_dir)->required();

  AnalyzeArgs an;
  auto* y = app.add_subcommand("analyze", "Assumption, bound and KKT reports for a latent solve");
  y->add_option("--input", an.input, "Solve output directory")->required();
  y->add_option("--truth", an.truth, "gen output directory (enables the bound reports)");
  y->add_option("--out-dir", an.out_dir)->required();

  BenchArgs be;
  std::uint64_t bench_seed = 0;
  auto* b = app.add_subcommand("bench", "Seeded Monte Carlo grid");
  b->add_option("--config", be.config, "JSON config (experiment block)");
  b->add_option("--trials", be.trials, "Trials per grid point");
  auto* seed_opt = b->add_option("--seed", bench_seed, "Base seed; trial i uses seed + i");
  b->add_option("--denoiser", be.denoiser);
  b->add_option("--out-dir", be.out_dir)->required();

  RenderArgs rn;
  auto* r = app.add_subcommand("render", "Write a band as a log-power PNG");
  r->add_option("--input", rn.input)->required();
  r->add_option("--band", rn.band, "Frequency bin");
  r->add_option("--out-dir", rn.out_dir)->required();

  std::vector<std::string> argv_store{"rme"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err);
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*s) return cmd_sample(smp, out);
    if (*v) return cmd_solve(sol, out);
    if (*e) return cmd_eval(ev, out);
    if (*y) return cmd_analyze(an, out);
    if (*b) {
      if (*seed_opt) be.seed = bench_seed;
      return cmd_bench(be, out);
    }
    if (*r) return cmd_render(rn, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace rme::cli
