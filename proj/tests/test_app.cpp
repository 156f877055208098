#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "qct/app.hpp"

using namespace qct;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("qct_app_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write_config(const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  }

  // Runs the CLI; stderr lands in dir/stderr.txt.
  int cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + QCT_CLI_PATH + " " + args + " 2> " + (dir / "stderr.txt").string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static Json json_at(const fs::path& p) { return Json::parse(slurp(p)); }

  fs::path dir;
};

const char* tiny_evolve = R"({"preset": "duffing-paper", "system": {"D": 0.01},
  "grid": {"q_min": -4, "q_max": 4, "p_min": -8, "p_max": 8, "n_q": 128, "n_p": 128},
  "solver": {"steps_per_period": 200, "periods": 0.1, "boundary_cap": 1e-3}})";

}  // namespace

TEST_F(Cli, TstarWritesThresholdAndManifest) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01}, "geometry": {"prefactor": 1400}})");
  ASSERT_EQ(cli("tstar --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  const auto t = json_at(dir / "out" / "threshold.json");
  EXPECT_NEAR(t["t_star"].get<double>(), 13.944, 1e-3);
  EXPECT_TRUE(t["satisfied"].get<bool>());
  const auto m = json_at(dir / "out" / "manifest.json");
  EXPECT_EQ(m["subcommand"], "tstar");
  EXPECT_EQ(m["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
  EXPECT_EQ(m["system"]["A"], 10.0);
  EXPECT_EQ(m["config"]["geometry"]["prefactor"], 1400);
  EXPECT_FALSE(m["partial"].get<bool>());
  EXPECT_EQ(m["artifacts"], Json::array({"threshold.json"}));
  EXPECT_TRUE(m["versions"].contains("qct"));
}

TEST_F(Cli, ThresholdTableVerdicts) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper"})");
  ASSERT_EQ(cli("threshold --config " + cfg.string() + " --out " + (dir / "out").string()), 0);
  const auto rows = json_at(dir / "out" / "threshold_table.json");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0]["satisfied"].get<bool>());
  EXPECT_FALSE(rows[1]["satisfied"].get<bool>());
  EXPECT_TRUE(rows[2]["satisfied"].get<bool>());
}

TEST_F(Cli, ConfigErrorsExitTwoWithErrorJson) {
  const auto bad = write_config("bad.json", R"({"hbar_bar": 1})");
  EXPECT_EQ(cli("tstar --config " + bad.string()), 2);
  const auto err = Json::parse(slurp(dir / "stderr.txt"));
  EXPECT_EQ(err["error"], "UnknownKey");
  EXPECT_EQ(err["exit_code"], 2);
  const auto broken = write_config("broken.json", "{\"preset\": ");
  EXPECT_EQ(cli("tstar --config " + broken.string()), 2);
  EXPECT_EQ(Json::parse(slurp(dir / "stderr.txt"))["error"], "ParseError");
  EXPECT_EQ(cli("tstar"), 2);                       // --config missing
  EXPECT_EQ(cli("nonsense --config x.json"), 2);    // unknown subcommand
  EXPECT_EQ(cli("tstar --config " + bad.string() + " --threads 0"), 2);
}

TEST_F(Cli, MissingFileIsAnIoError) {
  EXPECT_EQ(cli("tstar --config " + (dir / "nope.json").string()), 4);
  EXPECT_EQ(Json::parse(slurp(dir / "stderr.txt"))["error"], "IoError");
}

TEST_F(Cli, NumericalErrorsExitThreeAndFlagPartial) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01}, "geometry": {"t_max": 1}})");
  EXPECT_EQ(cli("tstar --config " + cfg.string() + " --out " + (dir / "out").string()), 3);
  EXPECT_EQ(json_at(dir / "out" / "error.json")["error"], "NoRoot");
  const auto m = json_at(dir / "out" / "manifest.json");
  EXPECT_TRUE(m["partial"].get<bool>());
  EXPECT_EQ(m["exit_code"], 3);
  // a later clean run into the same directory drops the old error report
  const auto ok = write_config("ok.json", R"({"preset": "duffing-paper", "system": {"D": 0.01}})");
  EXPECT_EQ(cli("tstar --config " + ok.string() + " --out " + (dir / "out").string()), 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "error.json"));
}

TEST_F(Cli, SeedRequiredUnlessGivenOnTheCommandLine) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01},
    "ensemble": {"n": 200, "steps_per_period": 200}, "solver": {"periods": 0.5, "steps_per_period": 200},
    "grid": {"q_min": -5.25, "q_max": 5.25, "p_min": -16, "p_max": 16, "n_q": 64, "n_p": 64}})");
  EXPECT_EQ(cli("ensemble --config " + cfg.string() + " --out " + (dir / "a").string()), 2);
  EXPECT_EQ(Json::parse(slurp(dir / "stderr.txt"))["message"].get<std::string>().find("seed") != std::string::npos, true);
  EXPECT_EQ(cli("ensemble --config " + cfg.string() + " --seed 7 --out " + (dir / "a").string()), 0);
  EXPECT_EQ(json_at(dir / "a" / "ensemble.json")["seed"], 7);
  EXPECT_EQ(json_at(dir / "a" / "manifest.json")["seed"], 7);
  EXPECT_EQ(slurp(dir / "a" / "ensemble.csv").substr(0, 4), "q,p\n");
}

TEST_F(Cli, OutputDirectoryPrecedence) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01},
    "output": {"dir": ")" + (dir / "from_config").string() + R"("}})");
  ASSERT_EQ(cli("tstar --config " + cfg.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "from_config" / "manifest.json"));
  ASSERT_EQ(cli("tstar --config " + cfg.string(), "QCT_OUT=" + (dir / "from_env").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "from_env" / "manifest.json"));
  ASSERT_EQ(cli("tstar --config " + cfg.string() + " --out " + (dir / "from_flag").string(),
                "QCT_OUT=" + (dir / "env2").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "from_flag" / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir / "env2"));
}

TEST_F(Cli, CompareConsumesEvolveDumps) {
  const auto cfg = write_config("c.json", tiny_evolve);
  ASSERT_EQ(cli("evolve-quantum --config " + cfg.string() + " --out " + (dir / "q").string()), 0);
  ASSERT_EQ(cli("evolve-classical --config " + cfg.string() + " --out " + (dir / "c").string()), 0);
  for (const char* f : {"wigner.bin", "wigner_diagnostics.csv", "wigner_slice.csv", "wigner.json"})
    EXPECT_TRUE(fs::exists(dir / "q" / f)) << f;
  const auto same = write_config("same.json", R"({"compare": {"a": ")" + (dir / "q" / "wigner.bin").string() +
                                                  R"(", "b": ")" + (dir / "q" / "wigner.bin").string() + R"("}})");
  ASSERT_EQ(cli("compare --config " + same.string() + " --out " + (dir / "s").string()), 0);
  const auto j = json_at(dir / "s" / "comparison.json");
  EXPECT_EQ(j["l1"], 0.0);
  EXPECT_EQ(j["regime"], "classical_matched");
  const auto pair = write_config("pair.json", R"({"compare": {"a": ")" + (dir / "c" / "classical.bin").string() +
                                                  R"(", "b": ")" + (dir / "q" / "wigner.bin").string() + R"("}})");
  ASSERT_EQ(cli("compare --config " + pair.string() + " --out " + (dir / "p").string()), 0);
  const auto k = json_at(dir / "p" / "comparison.json");
  EXPECT_GT(k["l1"].get<double>(), 0.0);
  EXPECT_LT(k["l1"].get<double>(), 1.0);
  const auto missing = write_config("missing.json", R"({"compare": {"a": "/nonexistent.bin", "b": "/nonexistent.bin"}})");
  EXPECT_EQ(cli("compare --config " + missing.string() + " --out " + (dir / "m").string()), 4);
}

TEST_F(Cli, RerunsAreByteIdenticalAcrossThreadCaps) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01}, "seed": 42,
    "ensemble": {"n": 3000, "steps_per_period": 200}, "solver": {"periods": 1, "steps_per_period": 200},
    "grid": {"q_min": -5.25, "q_max": 5.25, "p_min": -16, "p_max": 16, "n_q": 64, "n_p": 64}})");
  ASSERT_EQ(cli("ensemble --config " + cfg.string() + " --threads 1 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("ensemble --config " + cfg.string() + " --threads 4 --out " + (dir / "b").string()), 0);
  const auto ma = json_at(dir / "a" / "manifest.json");
  for (const auto& name : ma["artifacts"]) {
    const std::string n = name.get<std::string>();
    EXPECT_EQ(slurp(dir / "a" / n), slurp(dir / "b" / n)) << n;
  }
  auto mb = json_at(dir / "b" / "manifest.json");
  auto ma2 = ma;
  ma2.erase("timestamp");
  mb.erase("timestamp");
  EXPECT_EQ(ma2, mb);
  ASSERT_EQ(cli("ensemble --config " + cfg.string() + " --seed 43 --out " + (dir / "c").string()), 0);
  EXPECT_NE(slurp(dir / "a" / "ensemble.csv"), slurp(dir / "c" / "ensemble.csv"));
}

TEST_F(Cli, GeometrySubcommands) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "seed": 3,
    "geometry": {"manifold": {"n_periods": 2}, "lyapunov": {"t_transient": 2, "t_average": 20, "n_samples": 4}},
    "hyperbolic": {"n": 2000, "n_bootstrap": 20, "dt": 1e-3}, "system": {"D": 0.01}})");
  ASSERT_EQ(cli("manifold --config " + cfg.string() + " --out " + (dir / "m").string()), 0);
  EXPECT_EQ(slurp(dir / "m" / "manifold_unstable.csv").substr(0, 22), "period,arclength,q,p\n0");
  const auto mj = json_at(dir / "m" / "manifold.json");
  EXPECT_NEAR(mj["fixed_point"]["q"].get<double>(), 0.176069, 1e-5);
  ASSERT_EQ(cli("lyapunov --config " + cfg.string() + " --out " + (dir / "l").string()), 0);
  EXPECT_EQ(json_at(dir / "l" / "lyapunov.json")["samples"].size(), 4u);
  ASSERT_EQ(cli("strong-form --config " + cfg.string() + " --out " + (dir / "s").string()), 0);
  EXPECT_TRUE(json_at(dir / "s" / "strong_form.json").contains("loc_weak"));
  // the perturbative check lives at the undriven saddle
  const auto und = write_config("u.json", R"({"preset": "duffing-paper", "seed": 3, "system": {"D": 0.01, "Lambda": 0},
    "hyperbolic": {"n": 2000, "n_bootstrap": 20, "dt": 1e-3}})");
  ASSERT_EQ(cli("local-cumulants --config " + und.string() + " --out " + (dir / "h").string()), 0);
  EXPECT_EQ(json_at(dir / "h" / "cumulants.json")["rows"].size(), 1u);
}

TEST_F(Cli, SemiclassicalSubcommand) {
  const auto cfg = write_config("c.json", R"({"preset": "duffing-paper", "system": {"D": 0.01},
    "semiclassical": {"periods": 0.25, "X_max": 10, "n_X": 1024,
                      "grid": {"q_min": -3, "q_max": 3, "p_min": -10, "p_max": 10, "n_q": 16, "n_p": 16}}})");
  ASSERT_EQ(cli("semiclassical --config " + cfg.string() + " --out " + (dir / "o").string()), 0)
      << slurp(dir / "stderr.txt");
  EXPECT_EQ(slurp(dir / "o" / "branches.csv").substr(0, 18), "q0,q_t,p_t,J,S,nu\n");
  const auto f = read_field(dir / "o" / "semiclassical.bin");
  EXPECT_EQ(f.kind, FieldKind::Wigner);
  EXPECT_EQ(f.grid.n_q, 16u);
}

TEST(Run, InProcessMatchesCli) {
  auto c = parse_config(R"({"preset": "duffing-paper", "system": {"D": 0.01}})");
  const auto dir = fs::temp_directory_path() / "qct_app_inproc";
  fs::remove_all(dir);
  const auto r = run(c, {"tstar", dir, std::nullopt});
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_FALSE(r.error);
  EXPECT_EQ(r.artifacts, std::vector<std::string>{"threshold.json"});
  const auto bad = run(c, {"ensemble", dir, std::nullopt});
  EXPECT_EQ(bad.exit_code, 2);
  EXPECT_EQ((*bad.error)["error"], "ValidationError");
  fs::remove_all(dir);
}
