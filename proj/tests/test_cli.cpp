#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "rme/metrics.hpp"
#include "rme/render.hpp"
#include "rme/tensor_io.hpp"
#include "support.hpp"

using namespace rme;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return {code, out.str(), err.str()};
}

void must(const std::vector<std::string>& args) {
  const Run r = run(args);
  INFO(args.front() << " stderr: " << r.err);
  REQUIRE(r.code == 0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json_file(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.empty() ? 0 : 1;
  return n;
}

fs::path write_config(const fs::path& dir, const json& doc) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << doc.dump(2);
  return p;
}

json small_config() {
  return {{"max_iter", 15},
          {"denoiser", {{"kind", "box"}, {"box_radius", 1}}},
          {"experiment", {{"m", 10}, {"n", 10}, {"k", 8}, {"rank", 2}, {"sigma_s", {4.0}}}}};
}

// gen -> sample -> solve -> eval into `root`, returning the eval stdout.
std::string pipeline(const fs::path& root, const fs::path& config, const std::string& method) {
  must({"gen", "--config", config.string(), "--seed", "1", "--out-dir", (root / "gen").string()});
  must({"sample", "--input", (root / "gen" / "truth.rmt").string(), "--tau", "0.3", "--snr", "20", "--seed", "2",
        "--out-dir", (root / "sample").string()});
  must({"solve", "--input", (root / "sample" / "observed.rmt").string(), "--mask",
        (root / "sample" / "mask.json").string(), "--config", config.string(), "--method", method, "--out-dir",
        (root / "solve").string()});
  const Run ev = run({"eval", "--input", (root / "solve" / "estimate.rmt").string(), "--truth",
                      (root / "gen" / "truth.rmt").string(), "--out-dir", (root / "eval").string()});
  REQUIRE(ev.code == 0);
  return ev.out;
}

}  // namespace

TEST_CASE("pipeline reruns are bit-identical") {
  test::TempDir tmp("cli_repro");
  const fs::path cfg = write_config(tmp.path(), small_config());
  for (const std::string method : {"lapnp", "dapnp"}) {
    CAPTURE(method);
    const std::string a = pipeline(tmp / ("a_" + method), cfg, method);
    const std::string b = pipeline(tmp / ("b_" + method), cfg, method);
    CHECK(a == b);
    for (const char* f : {"gen/truth.rmt", "gen/slfs.rmt", "gen/psds.rmt", "sample/observed.rmt", "sample/mask.json",
                          "sample/noise.rmt", "solve/estimate.rmt"}) {
      CAPTURE(f);
      CHECK(slurp(tmp / ("a_" + method) / f) == slurp(tmp / ("b_" + method) / f));
    }
    CHECK(a.rfind("rse=", 0) == 0);
    CHECK(line_count(tmp / ("a_" + method) / "eval" / "metrics.csv") == 2);
  }
}

TEST_CASE("sidecars record configuration and seeds") {
  test::TempDir tmp("cli_sidecar");
  const fs::path cfg = write_config(tmp.path(), small_config());
  pipeline(tmp.path(), cfg, "lapnp");
  const json truth = read_json_file(tmp / "gen" / "truth.json");
  CHECK(truth.at("seed") == 1);
  CHECK(truth.at("config").at("experiment").at("m") == 10);
  CHECK(truth.at("model").at("r") == 2);
  CHECK(truth.at("emitter_locs").size() == 2);
  const json smp = read_json_file(tmp / "sample" / "sample.json");
  CHECK(smp.at("seed") == 2);
  CHECK(smp.at("tau") == doctest::Approx(0.3));
  CHECK(smp.at("observed_cells") == 30);
  const json sol = read_json_file(tmp / "solve" / "solve.json");
  CHECK(sol.at("config").at("max_iter") == 15);
  CHECK(sol.at("method") == "lapnp");
  CHECK(sol.at("rank") == 2);
  CHECK(line_count(tmp / "solve" / "run_log.jsonl") == sol.at("iterations").get<std::size_t>());

  // Unobserved cells carry no truth.
  const RadioMap obs = io::read_rmt1(tmp / "sample" / "observed.rmt");
  const SamplingMask mask = io::read_mask(tmp / "sample" / "mask.json", obs.grid());
  Index nonzero_cols = 0;
  for (Index j = 0; j < obs.grid().cells(); ++j) nonzero_cols += obs.matricized().col(j).norm() > 0 ? 1 : 0;
  CHECK(nonzero_cols <= mask.size());
}

TEST_CASE("full clean sampling with the identity denoiser recovers the map") {
  test::TempDir tmp("cli_identity");
  json doc = small_config();
  doc["lambda"] = 0.0;
  doc["max_iter"] = 400;
  doc["tol"] = 1e-10;
  doc["experiment"]["sigma_s"] = {0.0};
  const fs::path cfg = write_config(tmp.path(), doc);
  must({"gen", "--config", cfg.string(), "--seed", "3", "--out-dir", (tmp / "gen").string()});
  must({"sample", "--input", (tmp / "gen" / "truth.rmt").string(), "--tau", "1", "--seed", "4", "--out-dir",
        (tmp / "sample").string()});
  must({"solve", "--input", (tmp / "sample" / "observed.rmt").string(), "--mask",
        (tmp / "sample" / "mask.json").string(), "--config", cfg.string(), "--denoiser", "identity", "--out-dir",
        (tmp / "solve").string()});
  const RadioMap est = io::read_rmt1(tmp / "solve" / "estimate.rmt");
  const RadioMap truth = io::read_rmt1(tmp / "gen" / "truth.rmt");
  CHECK(metrics::rse(est, truth) <= 1e-3);
}

TEST_CASE("bench emits one row per trial and tau for each method") {
  test::TempDir tmp("cli_bench");
  json doc = small_config();
  doc["max_iter"] = 5;
  doc["experiment"]["taus"] = {0.2, 0.4};
  doc["experiment"]["snr_db"] = {"clean"};
  doc["experiment"]["methods"] = {"lapnp", "dapnp"};
  const fs::path cfg = write_config(tmp.path(), doc);
  must({"bench", "--config", cfg.string(), "--trials", "2", "--seed", "5", "--out-dir", (tmp / "bench").string()});

  std::ifstream rows(tmp / "bench" / "rows.csv");
  std::string header;
  std::getline(rows, header);
  std::map<std::string, int> per_method;
  for (std::string line; std::getline(rows, line);) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cols;
    while (std::getline(fields, cell, ',')) cols.push_back(cell);
    for (const auto& c : cols) {
      if (c.rfind("lapnp-", 0) == 0 || c.rfind("dapnp-", 0) == 0) ++per_method[c];
    }
  }
  CHECK(per_method.size() == 2);
  CHECK(per_method["lapnp-box"] == 4);
  CHECK(per_method["dapnp-box"] == 4);
  CHECK(line_count(tmp / "bench" / "aggregate.csv") == 1 + 4);
  const json meta = read_json_file(tmp / "bench" / "bench.json");
  CHECK(meta.at("failures").empty());
  CHECK(meta.at("config").at("experiment").at("trials") == 2);
}

TEST_CASE("render and analyze produce their artifacts") {
  test::TempDir tmp("cli_artifacts");
  const fs::path cfg = write_config(tmp.path(), small_config());
  pipeline(tmp.path(), cfg, "lapnp");

  must({"render", "--input", (tmp / "gen" / "truth.rmt").string(), "--band", "3", "--out-dir",
        (tmp / "png").string()});
  const std::string png = slurp(tmp / "png" / "truth_band3.png");
  const auto img = render::decode_png(std::vector<std::uint8_t>(png.begin(), png.end()));
  CHECK(img.rows == 10);
  CHECK(img.cols == 10);

  must({"analyze", "--input", (tmp / "solve").string(), "--truth", (tmp / "gen").string(), "--out-dir",
        (tmp / "analysis").string()});
  const json rep = read_json_file(tmp / "analysis" / "analysis.json");
  CHECK(rep.contains("s_z_relative_gap"));
  CHECK(rep.at("assumption1").size() == 2);
  CHECK(rep.at("assumption1")[0].at("passes") == true);
  CHECK(rep.at("kkt").contains("max"));
  CHECK(rep.at("lemma2").contains("alpha"));
}

TEST_CASE("bad invocations fail with a message") {
  test::TempDir tmp("cli_errors");
  const fs::path cfg = write_config(tmp.path(), small_config());
  pipeline(tmp.path(), cfg, "lapnp");

  SUBCASE("unknown flag") {
    const Run r = run({"gen", "--bogus", "1", "--out-dir", (tmp / "x").string()});
    CHECK(r.code != 0);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("unknown subcommand") {
    const Run r = run({"frobnicate"});
    CHECK(r.code != 0);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("bad magic") {
    const fs::path bad = tmp / "bad.rmt";
    std::ofstream(bad, std::ios::binary) << "XXXX0000000000000000";
    const Run r = run({"render", "--input", bad.string(), "--out-dir", (tmp / "png").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("error:") != std::string::npos);
  }
  SUBCASE("mask dimensions do not match the tensor") {
    json other = small_config();
    other["experiment"]["m"] = 12;
    const fs::path cfg2 = tmp / "other.json";
    std::ofstream(cfg2) << other.dump();
    must({"gen", "--config", cfg2.string(), "--out-dir", (tmp / "gen12").string()});
    const Run r = run({"solve", "--input", (tmp / "gen12" / "truth.rmt").string(), "--mask",
                       (tmp / "sample" / "mask.json").string(), "--out-dir", (tmp / "s12").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("error:") != std::string::npos);
  }
  SUBCASE("unknown config key") {
    const fs::path cfg3 = tmp / "typo.json";
    std::ofstream(cfg3) << R"({"lamda": 0.1})";
    const Run r = run({"gen", "--config", cfg3.string(), "--out-dir", (tmp / "g").string()});
    CHECK(r.code != 0);
    CHECK(r.err.find("lamda") != std::string::npos);
  }
  SUBCASE("missing required option") {
    const Run r = run({"eval", "--input", (tmp / "solve" / "estimate.rmt").string()});
    CHECK(r.code != 0);
    CHECK_FALSE(r.err.empty());
  }
}
