// Process-level checks of the command-line tool. The binary path arrives via
// the GEOECON_CLI environment variable (set by ctest).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const char* cli = std::getenv("GEOECON_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "geoecon_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

// tiny world configuration shared by the pipeline checks
fs::path write_config(const fs::path& dir) {
  const auto path = dir / "tiny.conf";
  std::ofstream f(path);
  f << "world.n_cells = 40\n"
       "select.stage_a_trees = 60\n"
       "select.n_realisations = 12\n"
       "select.realisation_trees = 30\n"
       "select.forward_trees = 30\n"
       "select.curve_trees = 60\n"
       "rf.n_trees = 60\n"
       "gb.n_rounds = 30\n";
  return path;
}

}  // namespace

TEST_CASE("unknown flags and missing inputs exit with the documented codes") {
  CHECK(run_cli("synth --bogus-flag").exit_code == 2);
  const auto usage = run_cli("--help");
  CHECK(usage.exit_code == 0);
  CHECK(usage.output.find("synth") != std::string::npos);
  CHECK(run_cli("").exit_code == 2);

  const auto missing = run_cli("features --cells /nonexistent/cells.csv");
  CHECK(missing.exit_code == 2);
  CHECK(missing.output.find("error") != std::string::npos);

  // validation failure: series with a broken cadence
  const auto dir = fresh_dir("badseries");
  {
    std::ofstream f(dir / "s.csv");
    f << "timestamp,1\n2001-01-01,1\n2001-01-03,2\n";
  }
  const auto bad = run_cli("ingest --series T2=" + (dir / "s.csv").string() +
                           " --out " + dir.string());
  CHECK(bad.exit_code == 3);
  CHECK(bad.output.find("non-uniform cadence") != std::string::npos);
}

TEST_CASE("pipeline runs end to end on a tiny world") {
  const auto dir = fresh_dir("pipeline");
  const auto conf = write_config(dir);
  const std::string base =
      " --config " + conf.string() + " --seed 5 --out " + dir.string();

  CHECK(run_cli("synth" + base).exit_code == 0);
  for (const char* f : {"cells.csv", "economy.csv", "truth.csv",
                        "series_MSLP.geof", "manifest_synth.json"})
    CHECK(fs::exists(dir / f));

  CHECK(run_cli("ingest --cells " + (dir / "cells.csv").string() +
                " --economy " + (dir / "economy.csv").string() + base)
            .exit_code == 0);
  CHECK(fs::exists(dir / "cells.geof"));

  CHECK(run_cli("features --cells " + (dir / "cells.geof").string() +
                " --series-dir " + dir.string() + base)
            .exit_code == 0);
  CHECK(fs::exists(dir / "features.geof"));

  CHECK(run_cli("target --economy " + (dir / "economy.csv").string() + base)
            .exit_code == 0);
  CHECK(fs::exists(dir / "target.csv"));

  const auto select = run_cli("select --features " +
                              (dir / "features.geof").string() + " --target " +
                              (dir / "target.csv").string() + base);
  CHECK(select.exit_code == 0);
  CHECK(fs::exists(dir / "selection_final.csv"));
  CHECK(fs::exists(dir / "selection_curve.csv"));
  CHECK(fs::exists(dir / "delta_step_2.csv"));

  {
    std::ofstream preds(dir / "preds.txt");
    preds << "Latitude\nMSLP SD S\nDist Major River\nMSLP SD\nT2 Mean\n";
  }
  const auto eval = run_cli("evaluate --features " +
                            (dir / "features.geof").string() + " --target " +
                            (dir / "target.csv").string() +
                            " --models rf,ml --mode kfold --sample all"
                            " --predictors " + (dir / "preds.txt").string() +
                            base);
  CHECK(eval.exit_code == 0);
  CHECK(fs::exists(dir / "eval_report.csv"));
  CHECK(eval.output.find("RF (5-fold)") != std::string::npos);

  const auto render = run_cli("render --cells " + (dir / "cells.csv").string() +
                              " --target " + (dir / "target.csv").string() +
                              " --mode tercile" + base);
  CHECK(render.exit_code == 0);
  const auto ppm = slurp(dir / "map.ppm");
  CHECK(ppm.substr(0, 15) == "P6\n360 180\n255\n");

  CHECK(run_cli("train --features " + (dir / "features.geof").string() +
                " --target " + (dir / "target.csv").string() +
                " --model rf" + base)
            .exit_code == 0);
  CHECK(fs::exists(dir / "model.geom"));
  CHECK(fs::exists(dir / "importance.csv"));
}

TEST_CASE("identical seeds give byte-identical artifacts across thread counts") {
  const auto d1 = fresh_dir("det1");
  const auto d2 = fresh_dir("det2");
  const auto conf = write_config(d1);
  fs::copy_file(conf, d2 / "tiny.conf");

  auto run_all = [&](const fs::path& dir, int threads) {
    const std::string base = " --config " + (dir / "tiny.conf").string() +
                             " --seed 11 --threads " +
                             std::to_string(threads) + " --out " + dir.string();
    REQUIRE(run_cli("synth" + base).exit_code == 0);
    REQUIRE(run_cli("features --cells " + (dir / "cells.csv").string() +
                    " --series-dir " + dir.string() + base)
                .exit_code == 0);
    REQUIRE(run_cli("target --economy " + (dir / "economy.csv").string() + base)
                .exit_code == 0);
    REQUIRE(run_cli("select --features " + (dir / "features.geof").string() +
                    " --target " + (dir / "target.csv").string() + base)
                .exit_code == 0);
  };
  run_all(d1, 1);
  run_all(d2, 2);
  for (const char* f :
       {"cells.csv", "economy.csv", "truth.csv", "features.geof", "target.csv",
        "selection_final.csv", "selection_curve.csv", "prediction_step_1.csv"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
}
