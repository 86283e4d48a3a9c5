#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "camegrad/cli/commands.hpp"
#include "camegrad/cli/config.hpp"
#include "camegrad/diagnostics.hpp"
#include "camegrad/errors.hpp"
#include "camegrad/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace camegrad;
using namespace camegrad::cli;

namespace {

const fs::path kData = CAMEGRAD_TEST_DATA;
const fs::path kConfigs = fs::path(CAMEGRAD_TEST_DATA) / ".." / ".." / "docs" / "configs";

struct Captured {
  std::ostringstream out;
  std::ostringstream err;
  Streams io() { return {out, err}; }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("camegrad_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string config_text(const std::string& strategy, std::size_t steps, const std::string& seeds,
                        const std::string& extra = "") {
  return "problem = conflict_landscape\nstrategy = " + strategy + "\n\n[train]\neta = 0.01\nsteps = " +
         std::to_string(steps) + "\nseed = " + seeds + "\n" + extra;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("shipped examples are valid") {
    for (const char* name : {"train_conflict.ini", "ablation.ini", "mlp_trace.ini", "sweep.ini",
                             "step.ini"}) {
      CAPTURE(name);
      CHECK_NOTHROW(load_experiment_config((kConfigs / name).string()));
    }
    const ExperimentConfig ab = load_experiment_config((kConfigs / "ablation.ini").string());
    CHECK(ab.strategies == ablation_grid());
    CHECK(ab.seeds.size() == 10);
    const ExperimentConfig sw = load_experiment_config((kConfigs / "sweep.ini").string());
    REQUIRE(sw.sweep);
    CHECK(sw.sweep->rho == std::vector<double>{0, 0.5});
    CHECK(sw.sweep->kappa.empty());
  }
  SUBCASE("defaults") {
    std::istringstream in("");
    const ExperimentConfig cfg = parse_experiment_config(in);
    CHECK(cfg.came.rho == 0.5);
    CHECK(cfg.came.kappa == 1.5);
    CHECK(cfg.came.nu == 0.2);
    CHECK(cfg.came.epsilon == 1e-8);
    CHECK(cfg.came.sgld_sigma == 0.01);
    CHECK_FALSE(cfg.sweep);
  }
  SUBCASE("rejections") {
    auto rejects = [](const std::string& text) {
      std::istringstream in(text);
      CHECK_THROWS_AS(parse_experiment_config(in), InvariantError);
    };
    rejects("problem = cifar\n");
    rejects("strategy = pcgrad\n");
    rejects("colour = red\n");
    rejects("[came]\nrho = 1.0\n");
    rejects("[came]\nkappa = abc\n");
    rejects("[train]\nsteps = 0\n");
    rejects("[sweep]\nrho =\n");
    rejects("[sweep]\n");
    rejects("[extras]\nx = 1\n");
    std::istringstream broken("[came\nrho = 0.5\n");
    CHECK_THROWS_AS(parse_experiment_config(broken), ParseError);
  }
  SUBCASE("number lists") {
    CHECK(parse_number_list("0, 0.5 1e-1", "k") == std::vector<double>{0, 0.5, 0.1});
    CHECK(parse_number_list("", "k").empty());
    CHECK_THROWS_AS(parse_number_list("1,x", "k"), InvariantError);
  }
}

TEST_CASE("rectify command") {
  SUBCASE("symmetric pair") {
    Captured c;
    REQUIRE(cmd_rectify({(kData / "symmetric_pair.txt").string(), 0.5}, c.io()) == kExitOk);
    const json j = json::parse(c.out.str());
    CHECK(j["u_rect"][0].get<double>() == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(j["u_rect"][1].get<double>() == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(j["dual_value"].get<double>() == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(j["alpha"].size() == 2);
    CHECK(std::abs(j["trust_region_residual"].get<double>()) < 1e-12);
  }
  SUBCASE("rho = 0 gives the mean") {
    Captured c;
    REQUIRE(cmd_rectify({(kData / "weighted_triple.txt").string(), 0.0}, c.io()) == kExitOk);
    const json j = json::parse(c.out.str());
    CHECK(j["u_rect"] == j["mu"]);
  }
  SUBCASE("malformed header") {
    Captured c;
    CHECK(cmd_rectify({(kData / "malformed_header.txt").string(), 0.5}, c.io()) == kExitParse);
    CHECK(c.err.str().find("line 1") != std::string::npos);
  }
  SUBCASE("invariant violations") {
    Captured c;
    CHECK(cmd_rectify({(kData / "bad_weight.txt").string(), 0.5}, c.io()) == kExitInvariant);
    CHECK(c.err.str().find("line 2") != std::string::npos);
    Captured r;
    CHECK(cmd_rectify({(kData / "symmetric_pair.txt").string(), 1.5}, r.io()) == kExitInvariant);
  }
  SUBCASE("missing file") {
    Captured c;
    CHECK(cmd_rectify({(kData / "nope.txt").string(), 0.5}, c.io()) == kExitParse);
  }
}

TEST_CASE("step command") {
  SUBCASE("kappa = 1, nu = 1 gives the weighted sum") {
    Captured c;
    StepArgs a;
    a.input = (kData / "weighted_triple.txt").string();
    a.kappa = 1.0;
    a.nu = 1.0;
    REQUIRE(cmd_step(a, c.io()) == kExitOk);
    const json j = json::parse(c.out.str());
    // 0.5 (1, -0.5, 0.25) + 1.25 (-0.75, 1, 0.5) + 2 (0.2, 0.3, -1)
    const std::vector<double> expect{0.5 - 0.9375 + 0.4, -0.25 + 1.25 + 0.6, 0.125 + 0.625 - 2.0};
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(j["g_final"][i].get<double>() == doctest::Approx(expect[i]).epsilon(1e-15));
    }
  }
  SUBCASE("defaults on the symmetric pair match the golden file") {
    Captured c;
    StepArgs a;
    a.input = (kData / "symmetric_pair.txt").string();
    REQUIRE(cmd_step(a, c.io()) == kExitOk);
    CHECK(c.out.str() == slurp(kData / "step_symmetric_golden.json"));
    Captured from_config;
    a.config = (kConfigs / "step.ini").string();
    REQUIRE(cmd_step(a, from_config.io()) == kExitOk);
    CHECK(from_config.out.str() == c.out.str());
  }
  SUBCASE("opposing pair falls back") {
    Captured c;
    StepArgs a;
    a.input = (kData / "opposing_pair.txt").string();
    REQUIRE(cmd_step(a, c.io()) == kExitOk);
    CHECK(json::parse(c.out.str())["degenerate_fallback"] == true);
  }
  SUBCASE("bad strategy") {
    Captured c;
    StepArgs a;
    a.input = (kData / "symmetric_pair.txt").string();
    a.strategy = "adam";
    CHECK(cmd_step(a, c.io()) == kExitInvariant);
  }
}

TEST_CASE("train command") {
  const fs::path dir = scratch("train");
  SUBCASE("ablation grid writes five logs per seed") {
    const fs::path cfg = write_file(dir / "ab.ini", config_text("ablation", 50, "1, 2"));
    Captured c;
    REQUIRE(cmd_train({cfg.string(), (dir / "out").string(), true, false}, c.io()) == kExitOk);
    CHECK(count_files(dir / "out", ".csv") == 10);
    for (const char* s : {"linear", "no_s1", "no_s2", "no_s3", "full"}) {
      CHECK(fs::exists(dir / "out" / ("conflict_landscape_" + std::string(s) + "_2.csv")));
    }
    const json summary = json::parse(slurp(dir / "out" / "summary.json"));
    CHECK(summary["runs"].size() == 10);
    CHECK(c.err.str().empty());
  }
  SUBCASE("one step gives one row") {
    const fs::path cfg = write_file(dir / "one.ini", config_text("full", 1, "3"));
    Captured c;
    REQUIRE(cmd_train({cfg.string(), (dir / "one").string(), true, false}, c.io()) == kExitOk);
    CHECK(lines_of(slurp(dir / "one" / "conflict_landscape_full_3.csv")).size() == 2);
  }
  SUBCASE("repeat runs are byte identical") {
    const fs::path cfg = write_file(dir / "rep.ini", config_text("full, s1_sgld_s3", 200, "4"));
    Captured a;
    Captured b;
    REQUIRE(cmd_train({cfg.string(), (dir / "a").string(), true, true}, a.io()) == kExitOk);
    REQUIRE(cmd_train({cfg.string(), (dir / "b").string(), true, true}, b.io()) == kExitOk);
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
    }
    CHECK(fs::exists(dir / "a" / "conflict_landscape_full_4_gfinal.csv"));
  }
  SUBCASE("divergence exits 4") {
    const fs::path cfg = write_file(
        dir / "div.ini", "problem = conflict_landscape\nstrategy = linear\n[train]\neta = 10\nsteps = 2000\n");
    Captured c;
    CHECK(cmd_train({cfg.string(), (dir / "div").string(), true, false}, c.io()) ==
          kExitDivergence);
    CHECK(c.err.str().find("diverged") != std::string::npos);
    CHECK(fs::exists(dir / "div" / "conflict_landscape_linear_7.csv"));
  }
  SUBCASE("environment overrides the configured directory") {
    const fs::path cfg = write_file(
        dir / "env.ini", config_text("linear", 5, "1", "") + "\n");
    ::setenv(kOutputEnvVar, (dir / "from_env").string().c_str(), 1);
    Captured c;
    const int code = cmd_train({cfg.string(), std::nullopt, true, false}, c.io());
    ::unsetenv(kOutputEnvVar);
    REQUIRE(code == kExitOk);
    CHECK(fs::exists(dir / "from_env" / "conflict_landscape_linear_1.csv"));
    CHECK(resolve_output_dir(std::string("x"), "y") == "x");
    CHECK(resolve_output_dir(std::nullopt, "y") == "y");
  }
  SUBCASE("progress lines every hundred steps") {
    const fs::path cfg = write_file(dir / "loud.ini", config_text("full", 250, "1"));
    Captured c;
    REQUIRE(cmd_train({cfg.string(), (dir / "loud").string(), false, false}, c.io()) == kExitOk);
    CHECK(lines_of(c.err.str()).size() == 2);
  }
}

TEST_CASE("sweep command") {
  const fs::path dir = scratch("sweep");
  const std::string sweep_cfg =
      config_text("full", 100, "1, 2", "[sweep]\nrho = 0, 0.5\nnu = 0.2, 0.9\n");
  const fs::path cfg = write_file(dir / "sweep.ini", sweep_cfg);

  SUBCASE("row count and cross-file consistency") {
    Captured c;
    REQUIRE(cmd_sweep({cfg.string(), (dir / "s").string(), true, 256, 1}, c.io()) == kExitOk);
    const auto rows = lines_of(slurp(dir / "s" / "sweep.csv"));
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == "rho,kappa,nu,seed,final_mean_loss,final_max_loss");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::istringstream row(rows[i]);
      std::vector<std::string> f;
      for (std::string tok; std::getline(row, tok, ',');) f.push_back(tok);
      REQUIRE(f.size() == 6);
      const fs::path run = dir / "s" / ("rho" + f[0] + "_kappa" + f[1] + "_nu" + f[2]) /
                           ("conflict_landscape_full_" + f[3] + ".csv");
      const auto log = lines_of(slurp(run));
      REQUIRE(log.size() == 101);
      std::istringstream last(log.back());
      std::vector<std::string> g;
      for (std::string tok; std::getline(last, tok, ',');) g.push_back(tok);
      const double l0 = std::stod(g[3]);
      const double l1 = std::stod(g[4]);
      CHECK(std::stod(f[4]) == (l0 + l1) / 2);
      CHECK(std::stod(f[5]) == std::max(l0, l1));
    }
  }
  SUBCASE("parallel runs match serial output") {
    Captured a;
    Captured b;
    REQUIRE(cmd_sweep({cfg.string(), (dir / "j1").string(), true, 256, 1}, a.io()) == kExitOk);
    REQUIRE(cmd_sweep({cfg.string(), (dir / "j3").string(), true, 256, 3}, b.io()) == kExitOk);
    CHECK(slurp(dir / "j1" / "sweep.csv") == slurp(dir / "j3" / "sweep.csv"));
    for (const auto& e : fs::recursive_directory_iterator(dir / "j1")) {
      if (!e.is_regular_file()) continue;
      CHECK(slurp(e.path()) == slurp(dir / "j3" / fs::relative(e.path(), dir / "j1")));
    }
  }
  SUBCASE("cap") {
    Captured c;
    CHECK(cmd_sweep({cfg.string(), (dir / "cap").string(), true, 7, 1}, c.io()) == kExitCap);
    CHECK_FALSE(fs::exists(dir / "cap"));
  }
  SUBCASE("empty list and missing section") {
    const fs::path empty = write_file(dir / "empty.ini", config_text("full", 10, "1", "[sweep]\nrho =\n"));
    Captured c;
    CHECK(cmd_sweep({empty.string(), (dir / "e").string(), true, 256, 1}, c.io()) ==
          kExitInvariant);
    const fs::path none = write_file(dir / "none.ini", config_text("full", 10, "1"));
    Captured d;
    CHECK(cmd_sweep({none.string(), (dir / "n").string(), true, 256, 1}, d.io()) ==
          kExitInvariant);
  }
}

TEST_CASE("oracle-check command") {
  SUBCASE("passing run") {
    Captured c;
    OracleCheckArgs a;
    a.count = 100;
    a.dims = 2;
    a.rho = 0.5;
    a.seed = 1;
    CHECK(cmd_oracle_check(a, c.io()) == kExitOk);
    const auto rows = lines_of(c.out.str());
    CHECK(rows.size() == 101);
    CHECK(rows[0] == "instance,dual_value,oracle_value,abs_gap");
  }
  SUBCASE("dimension guard") {
    Captured c;
    OracleCheckArgs a;
    a.dims = 5;
    CHECK(cmd_oracle_check(a, c.io()) == kExitInvariant);
  }
  SUBCASE("rho = 0 collapses both sides to the mean") {
    Captured c;
    OracleCheckArgs a;
    a.rho = 0.0;
    a.count = 50;
    a.dims = 3;
    REQUIRE(cmd_oracle_check(a, c.io()) == kExitOk);
    const auto rows = lines_of(c.out.str());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      CHECK(std::stod(rows[i].substr(rows[i].rfind(',') + 1)) <= 1e-12);
    }
  }
  SUBCASE("gap breach") {
    Captured c;
    OracleCheckArgs a;
    a.count = 5;
    a.resolution = 100;
    a.tolerance = 0.0;
    a.rho = 0.8;
    CHECK(cmd_oracle_check(a, c.io()) == kExitOracleGap);
  }
}

TEST_CASE("diagnose command") {
  const fs::path dir = scratch("diagnose");
  auto make_log = [&](const std::string& name, int rows, int negatives) {
    std::ostringstream s;
    s << "step,strategy,seed,loss_0,loss_1,joint_norm,min_cosine,negative_ratio\n";
    for (int i = 0; i < rows; ++i) {
      s << i << ",full,1,1,1,1," << (i < negatives ? "-0.5" : "0.5") << ",0\n";
    }
    return write_file(dir / name, s.str()).string();
  };

  SUBCASE("negative mass") {
    const std::string log = make_log("forty.csv", 100, 40);
    Captured c;
    DiagnoseArgs a;
    a.logs = {log};
    a.output_dir = (dir / "d1").string();
    REQUIRE(cmd_diagnose(a, c.io()) == kExitOk);
    const auto rows = lines_of(slurp(dir / "d1" / "histogram.csv"));
    REQUIRE(rows.size() == 41);
    double negative = 0.0;
    double total = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::istringstream r(rows[i]);
      std::string lo;
      std::string hi;
      std::string n;
      std::getline(r, lo, ',');
      std::getline(r, hi, ',');
      std::getline(r, n, ',');
      total += std::stod(n);
      if (std::stod(hi) <= 0.0) negative += std::stod(n);
    }
    CHECK(negative / total == 0.4);
    CHECK(json::parse(c.out.str())["negative_ratio"].get<double>() == 0.4);
  }
  SUBCASE("merged logs add up") {
    Captured c;
    DiagnoseArgs a;
    a.logs = {make_log("a.csv", 30, 10), make_log("b.csv", 70, 7)};
    a.output_dir = (dir / "d2").string();
    REQUIRE(cmd_diagnose(a, c.io()) == kExitOk);
    const json j = json::parse(c.out.str());
    CHECK(j["count"] == 100);
    CHECK(j["negative_count"] == 17);
  }
  SUBCASE("scaled gradient stream") {
    CounterRng rng(71);
    std::ostringstream base;
    std::ostringstream scaled;
    base << "step,g_0,g_1,g_2\n";
    scaled << "step,g_0,g_1,g_2\n";
    std::vector<GradVec> samples;
    for (int i = 0; i < 150; ++i) {
      const GradVec g{rng.normal(), rng.normal(), rng.normal()};
      samples.push_back(g);
      base << i;
      scaled << i;
      for (double v : g.values()) {
        base << ',' << format_double(v);
        scaled << ',' << format_double(1.5 * v);
      }
      base << '\n';
      scaled << '\n';
    }
    const fs::path pb = write_file(dir / "base.csv", base.str());
    const fs::path ps = write_file(dir / "scaled.csv", scaled.str());
    Captured c;
    DiagnoseArgs a;
    a.gradient_streams = {pb.string(), ps.string()};
    a.output_dir = (dir / "d3").string();
    a.kappa = 1.5;
    REQUIRE(cmd_diagnose(a, c.io()) == kExitOk);
    const json j = json::parse(c.out.str());
    const double t0 = j["traces"][0]["final_trace"].get<double>();
    const double t1 = j["traces"][1]["final_trace"].get<double>();
    CHECK(std::abs(t1 / t0 / 2.25 - 1.0) <= 1e-10);
    CHECK(std::abs(j["traces"][0]["kappa_ratio"].get<double>() / 2.25 - 1.0) <= 1e-10);
    CHECK(fs::exists(dir / "d3" / "trace_base.csv"));
    CHECK(lines_of(slurp(dir / "d3" / "trace_base.csv")).size() == 150);
  }
  SUBCASE("schema mismatch") {
    const fs::path bad = write_file(dir / "bad.csv", "step,loss\n0,1\n");
    Captured c;
    DiagnoseArgs a;
    a.logs = {bad.string()};
    a.output_dir = (dir / "d4").string();
    CHECK(cmd_diagnose(a, c.io()) == kExitParse);
    const fs::path ragged = write_file(
        dir / "ragged.csv",
        "step,strategy,seed,loss_0,joint_norm,min_cosine,negative_ratio\n0,full,1,1,1\n");
    a.logs = {ragged.string()};
    Captured d;
    CHECK(cmd_diagnose(a, d.io()) == kExitParse);
    CHECK(d.err.str().find("line 2") != std::string::npos);
  }
}
