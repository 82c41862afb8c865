#include "support.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace eofdual;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("eofdual_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // exit status of the CLI; stdout goes to out.txt, stderr to err.txt
  int run(const std::string& args) const {
    const std::string cmd =
        std::string(EOFDUAL_CLI) + " " + args + " > " + path("out.txt") + " 2> " + path("err.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out() const { return read(path("out.txt")); }
  std::string err() const { return read(path("err.txt")); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, EofWoottersOnBell) {
  write("bell.json", operator_to_json(DensityMatrix(BipartiteDims(2, 2), oracle::bell_projector())).dump());
  ASSERT_EQ(run("eof --wootters --in " + path("bell.json")), 0) << err();
  const Json j = Json::parse(out());
  EXPECT_NEAR(j.at("value").get<double>(), std::log(2.0), 1e-12);
  EXPECT_EQ(j.at("config").at("command"), "eof");
}

TEST_F(CliTest, EofRoofWritesOutFile) {
  write("w.json", operator_to_json(DensityMatrix(BipartiteDims(2, 2), oracle::werner_like(0.8))).dump());
  ASSERT_EQ(run("eof --restarts 8 --in " + path("w.json") + " --out " + path("r.json")), 0) << err();
  EXPECT_TRUE(out().empty());
  EXPECT_NEAR(Json::parse(read(path("r.json"))).at("value").get<double>(), 0.41024429307387456, 1e-4);
}

TEST_F(CliTest, GBothMethods) {
  write("m.json", operator_to_json(sample_filter_m(BipartiteDims(2, 2), 3)).dump());
  ASSERT_EQ(run("g --method both --restarts 16 --in " + path("m.json")), 0) << err();
  const Json j = Json::parse(out());
  EXPECT_NEAR(j.at("difference").get<double>(), 0.0, 1e-6);
}

TEST_F(CliTest, HpSweepCsvIsByteIdenticalOnRerun) {
  write("m.json", operator_to_json(sample_filter_m(BipartiteDims(2, 2), 4)).dump());
  const std::string args = "hp-sweep --restarts 2 --p-grid 1,0.1,0.01 --in " + path("m.json") + " --csv ";
  ASSERT_EQ(run(args + path("a.csv")), 0) << err();
  const std::string json_a = out();
  ASSERT_EQ(run(args + path("b.csv")), 0) << err();
  EXPECT_EQ(out(), json_a);
  const std::string csv = read(path("a.csv"));
  EXPECT_EQ(csv, read(path("b.csv")));
  EXPECT_EQ(sweep_rows_from_csv(csv).size(), 3u);
}

TEST_F(CliTest, NuQOnWernerHolevo) {
  write("wh.json", channel_to_json(werner_holevo_channel(3)).dump());
  ASSERT_EQ(run("nu-q --q 5 --restarts 8 --in " + path("wh.json")), 0) << err();
  EXPECT_NEAR(Json::parse(out()).at("value").get<double>(), 0.5743491774985174, 1e-9);
}

TEST_F(CliTest, ChecksPassWithExitZero) {
  EXPECT_EQ(run("check-duality --trials 2 --restarts 8"), 0) << err();
  EXPECT_TRUE(Json::parse(out()).at("pass").get<bool>());
  EXPECT_EQ(run("check-lemma2 --trials 2 --restarts 16"), 0) << err();
  EXPECT_TRUE(Json::parse(out()).at("pass").get<bool>());
}

TEST_F(CliTest, FailedCheckExitsTwo) {
  // a negative tolerance cannot be met
  EXPECT_EQ(run("check-lemma2 --trials 1 --restarts 4 --tol -1"), 2) << err();
  EXPECT_FALSE(Json::parse(out()).at("pass").get<bool>());
}

TEST_F(CliTest, GapSearchViolationExitsTwo) {
  write("wh.json", channel_to_json(werner_holevo_channel(3)).dump());
  EXPECT_EQ(run("gap-search --kind nu_mult --trials 1 --restarts 8 --in " + path("wh.json")), 2) << err();
  const Json j = Json::parse(out());
  EXPECT_EQ(j.at("summary").at("violations"), 1);
}

TEST_F(CliTest, GapSearchIsByteIdenticalOnRerun) {
  const std::string args = "gap-search --kind g_subadd --trials 2 --restarts 4 --seed 5";
  ASSERT_EQ(run(args), 0) << err();
  const std::string a = out();
  ASSERT_EQ(run(args), 0) << err();
  EXPECT_EQ(out(), a);
  EXPECT_EQ(a.find("wall_seconds"), std::string::npos);
  ASSERT_EQ(run(args + " --timing"), 0) << err();
  EXPECT_NE(out().find("wall_seconds"), std::string::npos);
}

TEST_F(CliTest, WhDemo) {
  ASSERT_EQ(run("wh-demo --restarts 8"), 0) << err();
  const Json j = Json::parse(out());
  EXPECT_TRUE(j.at("violated").get<bool>());
  EXPECT_NEAR(j.at("log_gap").get<double>(), -0.011979628316213908, 1e-6);
}

TEST_F(CliTest, ErrorsExitOne) {
  EXPECT_EQ(run("eof --in " + path("missing.json")), 1);
  EXPECT_NE(err().find("cannot open"), std::string::npos);
  write("bad.json", R"({"dims":{"dA":2,"dB":2},"matrix":[[1,0],[0,1]]})");
  EXPECT_EQ(run("eof --in " + path("bad.json")), 1);
  EXPECT_NE(err().find("matrix"), std::string::npos);
  write("broken.json", "{not json");
  EXPECT_EQ(run("conjugate --in " + path("broken.json")), 1);
  EXPECT_EQ(run("eof"), 1);                    // --in missing
  EXPECT_EQ(run("no-such-command"), 1);        // parse error
  EXPECT_EQ(run("gap-search --kind other"), 1);
  EXPECT_EQ(run("hp-sweep --p-grid 0.1,0.5 --in " + path("bad.json")), 1);
}
