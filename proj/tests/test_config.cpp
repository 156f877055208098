#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "qct/config.hpp"

using namespace qct;

namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "accepted: " << text;
  return ErrorKind::InvalidArgument;
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, PresetExpands) {
  const auto c = parse_config(R"({"preset": "duffing-paper"})");
  EXPECT_EQ(c.system.A, 10.0);
  EXPECT_EQ(c.system.B, 0.5);
  EXPECT_EQ(c.system.Lambda, 10.0);
  EXPECT_EQ(c.system.omega, 6.07);
  EXPECT_EQ(c.system.hbar, 0.1);
  EXPECT_EQ(c.system.m, 1.0);
  EXPECT_EQ(c.grid.n_q, 512u);
  EXPECT_EQ(c.echo["preset"], "duffing-paper");
}

TEST(Config, OverridesOnTopOfPreset) {
  const auto c = parse_config(R"({"preset": "duffing-paper", "system": {"D": 0.01},
                                  "grid": {"q_min": -4, "q_max": 4, "p_min": -8, "p_max": 8, "n_q": 64, "n_p": 128}})");
  EXPECT_EQ(c.system.D, 0.01);
  EXPECT_EQ(c.system.A, 10.0);
  EXPECT_EQ(c.grid.n_p, 128u);
  EXPECT_DOUBLE_EQ(c.grid.dq(), 8.0 / 64);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  EXPECT_EQ(kind_of(R"({"hbar_bar": 1})"), ErrorKind::UnknownKey);
  EXPECT_NE(message_of(R"({"hbar_bar": 1})").find("hbar_bar"), std::string::npos);
  EXPECT_EQ(kind_of(R"({"geometry": {"manifold": {"guess": 1}}})"), ErrorKind::UnknownKey);
  EXPECT_NE(message_of(R"({"geometry": {"manifold": {"guess": 1}}})").find("geometry.manifold.guess"), std::string::npos);
}

TEST(Config, ParseErrorCarriesPosition) {
  EXPECT_EQ(kind_of("{\n  \"preset\": \"duffing-paper\",\n  oops\n}"), ErrorKind::ParseError);
  EXPECT_NE(message_of("{\n  \"preset\": \"duffing-paper\",\n  oops\n}").find("line 3"), std::string::npos);
}

TEST(Config, SeedRequiredForStochasticExperiments) {
  EXPECT_EQ(kind_of(R"({"experiment": "ensemble"})"), ErrorKind::ValidationError);
  EXPECT_NE(message_of(R"({"experiment": "ensemble"})").find("seed"), std::string::npos);
  EXPECT_EQ(kind_of(R"({"experiment": "lyapunov"})"), ErrorKind::ValidationError);
  EXPECT_NO_THROW(parse_config(R"({"experiment": "ensemble", "seed": 4})"));
  EXPECT_NO_THROW(parse_config(R"({"experiment": "ensemble"})", 4));
  EXPECT_NO_THROW(parse_config(R"({"experiment": "tstar"})"));
  EXPECT_EQ(kind_of(R"({"seed": -1})"), ErrorKind::ValidationError);
  EXPECT_EQ(parse_config(R"({"seed": 18446744073709551615})").seed.value(), 18446744073709551615ull);
}

TEST(Config, TypeErrorsNameTheKey) {
  EXPECT_EQ(kind_of(R"({"system": {"A": "ten"}})"), ErrorKind::ValidationError);
  EXPECT_NE(message_of(R"({"system": {"A": "ten"}})").find("system.A"), std::string::npos);
  EXPECT_EQ(kind_of(R"({"grid": {"n_q": 100}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"system": {"m": 0}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"preset": "nope"})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"experiment": "dance"})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"hyperbolic": {"lambda_source": "both"}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"geometry": {"calibrate": {"D": 0.01}}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"geometry": {"strong_form": {"eta": 1.5}}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"experiment": "compare"})"), ErrorKind::ValidationError);
}

TEST(Config, SnapshotsMustSitOnTheStepLattice) {
  EXPECT_NO_THROW(parse_config(R"({"solver": {"steps_per_period": 2000, "periods": 3, "snapshot_periods": [0.5, 1.25]}})"));
  EXPECT_EQ(kind_of(R"({"solver": {"steps_per_period": 2000, "periods": 3, "snapshot_periods": [0.00001]}})"),
            ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"solver": {"periods": 3, "snapshot_periods": [4]}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"solver": {"sampling_phase": 1.0}})"), ErrorKind::ValidationError);
  EXPECT_EQ(kind_of(R"({"solver": {"boundary_cap": 0}})"), ErrorKind::ValidationError);
}

TEST(Config, SectionsRoundTrip) {
  const auto c = parse_config(R"({
    "geometry": {"lambda_bar": 0.6, "calibrate": {"D": 0.01, "t_star": 14}, "D_list": [1e-4],
                 "lyapunov": {"n_samples": 4, "t_average": 10},
                 "manifold": {"guess_q": 0.15, "stable": false}},
    "hyperbolic": {"lambda_source": "driven", "t_list": [0.1, 0.2], "n": 100},
    "semiclassical": {"n_X": 2048, "grid": {"q_min": -1, "q_max": 1, "p_min": -1, "p_max": 1, "n_q": 16, "n_p": 16}},
    "compare": {"a": "x.bin", "b": "y.bin", "neg_hi": 0.2},
    "output": {"dir": "somewhere"}})");
  EXPECT_EQ(c.geometry.lambda_bar, 0.6);
  EXPECT_EQ(c.geometry.calibrate_t.value(), 14.0);
  EXPECT_EQ(c.geometry.D_list, std::vector<double>{1e-4});
  EXPECT_EQ(c.geometry.lyapunov.n_samples, 4u);
  EXPECT_FALSE(c.geometry.manifold.stable);
  EXPECT_EQ(c.hyperbolic.t_list.size(), 2u);
  EXPECT_EQ(c.semiclassical.grid.n_q, 16u);
  EXPECT_EQ(c.compare.thresholds.neg_hi, 0.2);
  EXPECT_EQ(c.compare.thresholds.l1_lo, 0.05);
  EXPECT_EQ(c.output_dir, "somewhere");
}

TEST(Config, LoadFromFile) {
  const auto dir = std::filesystem::temp_directory_path() / "qct_test_config";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "ok.json") << R"({"preset": "duffing-paper", "system": {"D": 0.001}})";
  }
  EXPECT_EQ(load_config(dir / "ok.json").system.D, 0.001);
  try {
    load_config(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
    EXPECT_EQ(exit_code_for(e.kind()), 4);
  }
  std::filesystem::remove_all(dir);
}

TEST(Config, ExitCodeClasses) {
  EXPECT_EQ(exit_code_for(ErrorKind::UnknownKey), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::ParseError), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::BoundaryMassExceeded), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::BadMagic), 4);
  EXPECT_EQ(subcommands().size(), 12u);
}
