#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include "ivdyn/io.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = IVDYN_CLI_PATH;
const std::string kMaps = IVDYN_MAPS_DIR;

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("ivdyn_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& log) {
    std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(Cli, HelpSucceeds) {
    auto d = scratch("help");
    EXPECT_EQ(run("--help", d / "log"), 0);
    EXPECT_NE(slurp(d / "log").find("verify"), std::string::npos);
}

TEST(Cli, UnknownFlagIsUsageError) {
    auto d = scratch("flag");
    EXPECT_EQ(run("entropy --catalog tent-2 --bogus", d / "log"), 2);
}

TEST(Cli, MissingSourceIsUsageError) {
    auto d = scratch("nosrc");
    EXPECT_EQ(run("entropy --out " + d.string(), d / "log"), 2);
}

TEST(Cli, BadFormatIsUsageError) {
    auto d = scratch("fmt");
    EXPECT_EQ(run("entropy --catalog tent-2 --format xml --out " + d.string(), d / "log"), 2);
}

TEST(Cli, ParseErrorReportsLocation) {
    auto d = scratch("broken");
    EXPECT_EQ(run("entropy --map " + kMaps + "/broken.map --out " + d.string(), d / "log"), 2);
    EXPECT_NE(slurp(d / "log").find("3:32: expected ']'"), std::string::npos) << slurp(d / "log");
}

TEST(Cli, HistoricWithoutCycleIsAssertionFailure) {
    auto d = scratch("nocycle");
    EXPECT_EQ(run("historic --catalog logistic-3.2 --samples 20 --horizon 100000 --out " + d.string(), d / "log"), 1);
}

TEST(Cli, OutputsCarryHeader) {
    auto d = scratch("header");
    ASSERT_EQ(run("entropy --map " + kMaps + "/tent.map --seed 9 --out " + d.string(), d / "log"), 0);
    auto j = ivdyn::io::Json::parse(slurp(d / "tent-2.entropy.json"));
    EXPECT_EQ(j["schema"], 1);
    EXPECT_EQ(j["seed"], 9);
    EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
    auto csv = slurp(d / "tent-2.entropy.csv");
    EXPECT_EQ(csv.rfind("# schema=1", 0), 0u);
    EXPECT_NE(csv.find("seed=9"), std::string::npos);
    EXPECT_NE(csv.find(j["config_hash"].get<std::string>()), std::string::npos);
}

TEST(Cli, EnvironmentSetsOutputDirectory) {
    auto d = scratch("env");
    std::string args = "orbit --catalog doubling --x0 1/3 -n 10 --format csv";
    int st = std::system(("IVDYN_OUT=" + d.string() + " " + kCli + " " + args + " > /dev/null 2>&1").c_str());
    ASSERT_TRUE(WIFEXITED(st));
    EXPECT_EQ(WEXITSTATUS(st), 0);
    auto csv = slurp(d / "doubling.orbit.csv");
    EXPECT_NE(csv.find("0.66666666666666663"), std::string::npos) << csv;
}

TEST(Cli, SeedChangesHash) {
    auto d = scratch("seed");
    ASSERT_EQ(run("entropy --catalog tent-2 --format json --seed 1 --out " + d.string(), d / "log"), 0);
    auto a = ivdyn::io::Json::parse(slurp(d / "tent-2.entropy.json"))["config_hash"];
    ASSERT_EQ(run("entropy --catalog tent-2 --format json --seed 2 --out " + d.string(), d / "log"), 0);
    auto b = ivdyn::io::Json::parse(slurp(d / "tent-2.entropy.json"))["config_hash"];
    EXPECT_NE(a, b);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    const std::string cmds[] = {"attractors --catalog logistic-3.83 --samples 30 --horizon 100000 --format json",
                                "stats --catalog logistic-4 --horizon 100000 --format csv --format json",
                                "orbit --map " + kMaps + "/logistic-3.2.map -n 500 --format csv",
                                "decompose --catalog bimodal-halves --eps 0.00390625 --format json",
                                "returnmap --catalog doubling --format json"};
    int i = 0;
    for (const auto& c : cmds) {
        auto d1 = scratch("det1_" + std::to_string(i)), d2 = scratch("det2_" + std::to_string(i));
        ++i;
        ASSERT_EQ(run(c + " --out " + d1.string(), d1 / "log"), 0) << c;
        ASSERT_EQ(run(c + " --out " + d2.string(), d2 / "log"), 0) << c;
        std::size_t files = 0;
        for (const auto& e : fs::directory_iterator(d1)) {
            if (e.path().filename() == "log") continue;
            ++files;
            EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path();
        }
        EXPECT_GT(files, 0u) << c;
    }
}
