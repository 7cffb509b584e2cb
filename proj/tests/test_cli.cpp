#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ridgeless/cli.hpp"

using namespace ridgeless;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ridgeless");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("ridgeless_cli_" + name);
    std::filesystem::remove_all(p);
    return p;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

}  // namespace

TEST(Cli, MseVsNormWritesCsvNamedBySeed) {
    const auto dir = scratch("mse");
    const CliRun r = cli({"mse-vs-norm", "--seed", "42", "--trials", "5", "--d", "60", "--n", "12", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = dir / "mse-vs-norm_42.csv";
    ASSERT_TRUE(std::filesystem::exists(csv));
    EXPECT_TRUE(std::filesystem::exists(dir / "mse-vs-norm_42.json"));
    const auto lines = read_lines(csv);
    ASSERT_EQ(lines.size(), 6u);  // header + 5 grid points
    EXPECT_EQ(lines[0], "v_norm,train_mse_mean,test_mse_mean,test_mse_std\r");
    const auto meta = nlohmann::json::parse(std::ifstream(dir / "mse-vs-norm_42.json"));
    EXPECT_EQ(meta["metadata"]["config"]["trials"], 5);
    EXPECT_NE(r.err.find("trials = 5"), std::string::npos);  // effective config logged
}

TEST(Cli, OverrideBeatsConfigFile) {
    const auto dir = scratch("override");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "seed = 5\ntrials = 2\nn_sweep = 3, 6\n";
    const CliRun r = cli({"pinv-descent", "--config", (dir / "run.cfg").string(), "--seed", "8", "--out", dir.string(),
                       "--no-json"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(std::filesystem::exists(dir / "pinv-descent_8.csv"));
    EXPECT_FALSE(std::filesystem::exists(dir / "pinv-descent_8.json"));
    EXPECT_EQ(read_lines(dir / "pinv-descent_8.csv").size(), 3u);
}

TEST(Cli, DashedAndUnderscoredKeysAccepted) {
    const auto dir = scratch("dashed");
    EXPECT_EQ(cli({"mse-vs-norm", "--n-test", "4", "--trials", "1", "--d", "20", "--n", "4", "--out", dir.string()}).code, 0);
    EXPECT_EQ(cli({"mse-vs-norm", "--n_test", "4", "--trials", "1", "--d", "20", "--n", "4", "--out", dir.string()}).code, 0);
}

TEST(Cli, CondDescentSweepPeaksAtDimension) {
    const auto dir = scratch("cond");
    const CliRun r = cli({"cond-descent", "--sigma", "5", "--n-sweep", "7,15,30", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(std::ifstream(dir / "cond-descent_42.json"));
    const double c7 = j["rows"][0][2], c15 = j["rows"][1][2], c30 = j["rows"][2][2];
    EXPECT_GT(c15, c7);
    EXPECT_GT(c15, c30);
}

TEST(Cli, SelftestExitsZero) {
    const CliRun r = cli({"selftest", "--trials", "3"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("selftest passed"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, exit_usage);
    EXPECT_EQ(cli({"frobnicate"}).code, exit_usage);
    const CliRun bad = cli({"mse-vs-norm", "--bogus", "1"});
    EXPECT_EQ(bad.code, exit_usage);
    EXPECT_NE(bad.err.find("mse-vs-norm"), std::string::npos);  // usage text
    EXPECT_EQ(cli({"mse-vs-norm", "--config", "/nonexistent/x.cfg"}).code, exit_usage);
}

TEST(Cli, ConfigErrorsExitOne) {
    const CliRun r = cli({"cond-descent", "--sigma", "-1"});
    EXPECT_EQ(r.code, exit_usage);
    EXPECT_NE(r.err.find("sigma"), std::string::npos);
    const CliRun u = cli({"mse-vs-norm", "--d", "5", "--n", "10", "--trials", "1"});
    EXPECT_EQ(u.code, exit_usage);
    EXPECT_NE(u.err.find("d > n"), std::string::npos);

    const auto dir = scratch("badkey");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "bad.cfg") << "seed = 1\nwidth = 2\n";
    const CliRun k = cli({"loo-bench", "--config", (dir / "bad.cfg").string()});
    EXPECT_EQ(k.code, exit_usage);
    EXPECT_NE(k.err.find("valid keys"), std::string::npos);
}

TEST(Cli, HelpAndVersion) {
    const CliRun h = cli({"--help"});
    EXPECT_EQ(h.code, 0);
    EXPECT_NE(h.out.find("loo-bench"), std::string::npos);
    EXPECT_EQ(cli({"--version"}).code, 0);
}

TEST(Cli, SameArgumentsSameOutput) {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    ASSERT_EQ(cli({"stability-audit", "--trials", "2", "--n", "6", "--d", "4", "--out", a.string()}).code, 0);
    ASSERT_EQ(cli({"stability-audit", "--trials", "2", "--n", "6", "--d", "4", "--out", b.string()}).code, 0);
    EXPECT_EQ(read_lines(a / "stability-audit_42.csv"), read_lines(b / "stability-audit_42.csv"));
}
