#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cascadefit/cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using cascadefit::cli::run;

namespace {

const std::string kData = CASCADEFIT_TEST_DATA;

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("cascadefit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, BuildCascadesWritesOneFilePerRoot)
{
    const auto r = cli({"build-cascades", "--input", kData + "/fixture_three_roots.jsonl", "--out", path("c")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "roots=3 events=12 orphans=4 malformed=0 cascades_written=3\n");
    for (const char* root : {"A", "B", "C"}) {
        const std::string name = std::string("cascade_") + root + ".json";
        EXPECT_EQ(slurp(dir_ / "c" / name), slurp(fs::path(kData) / "golden" / name));
    }
    EXPECT_EQ(slurp(dir_ / "c" / "build_report.json"), slurp(fs::path(kData) / "golden" / "build_report.json"));

    const auto manifest = nlohmann::json::parse(slurp(dir_ / "c" / "manifest.json"));
    EXPECT_EQ(manifest["command"], "build-cascades");
    EXPECT_EQ(manifest["inputs"].size(), 1u);
    for (const auto& name : manifest["outputs"])
        EXPECT_TRUE(fs::exists(dir_ / "c" / name.get<std::string>()));
}

TEST_F(CliTest, BuildCascadesBundleAndSelection)
{
    const auto r = cli({"build-cascades", "--input", kData + "/fixture_three_roots.jsonl", "--out", path("b"),
                        "--bundle", "--min-size", "1", "--top-k", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto bundle = nlohmann::json::parse(slurp(dir_ / "b" / "cascades.json"));
    ASSERT_EQ(bundle.size(), 1u);
    EXPECT_EQ(bundle[0]["root_id"], "A");
}

TEST_F(CliTest, BuildCascadesStrictAndMissingInput)
{
    EXPECT_EQ(cli({"build-cascades", "--input", kData + "/fixture_small.jsonl", "--out", path("s"), "--strict"}).code,
              3);
    const auto lenient = cli({"build-cascades", "--input", kData + "/fixture_small.jsonl", "--out", path("s")});
    EXPECT_EQ(lenient.code, 0);
    EXPECT_NE(lenient.err.find("fixture_small.jsonl:6"), std::string::npos);
    EXPECT_EQ(cli({"build-cascades", "--input", path("absent.jsonl"), "--out", path("s")}).code, 2);
}

TEST_F(CliTest, BuildCascadesEmptyInput)
{
    std::ofstream(path("empty.jsonl")).flush();
    const auto r = cli({"build-cascades", "--input", path("empty.jsonl"), "--out", path("e")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    for (const auto& entry : fs::directory_iterator(dir_ / "e"))
        EXPECT_FALSE(entry.path().filename().string().starts_with("cascade"));
}

TEST_F(CliTest, SynthIsDeterministic)
{
    ASSERT_EQ(cli({"synth", "--n", "5", "--seed", "7", "--n-agents", "2000", "--out", path("a")}).code, 0);
    ASSERT_EQ(cli({"synth", "--n", "5", "--seed", "7", "--n-agents", "2000", "--out", path("b")}).code, 0);
    for (int k = 0; k < 5; ++k) {
        const std::string name = "synth_000" + std::to_string(k) + ".jsonl";
        ASSERT_TRUE(fs::exists(dir_ / "a" / name));
        EXPECT_EQ(slurp(dir_ / "a" / name), slurp(dir_ / "b" / name));
    }
    EXPECT_TRUE(fs::exists(dir_ / "a" / "synth_0004.truth.json"));
}

TEST_F(CliTest, SynthCdseizEmitsEveryAction)
{
    ASSERT_EQ(cli({"synth", "--model", "cdseiz", "--seed", "3", "--n-agents", "3000", "--out", path("s")}).code, 0);
    std::set<std::string> actions;
    std::ifstream in(dir_ / "s" / "synth_0000.jsonl");
    for (std::string line; std::getline(in, line);)
        actions.insert(nlohmann::json::parse(line)["action"].get<std::string>());
    EXPECT_EQ(actions, (std::set<std::string>{"root", "retweet", "quote", "reply"}));
}

TEST_F(CliTest, SynthRejectsShortHorizon)
{
    EXPECT_EQ(cli({"synth", "--horizon", "5", "--out", path("s")}).code, 2);
    EXPECT_EQ(cli({"synth", "--model", "sis", "--out", path("s")}).code, 2);
    EXPECT_EQ(cli({"synth", "--model", "cdseiz", "--p", "0.5", "--out", path("s")}).code, 2);
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence)
{
    std::ofstream(path("run.toml")) << "[synth]\nn=2\nseed=9\nhorizon=12\nn-agents=500\n";
    ASSERT_EQ(cli({"--config", path("run.toml"), "synth", "--seed", "4", "--out", path("o")}).code, 0);
    const auto manifest = nlohmann::json::parse(slurp(dir_ / "o" / "manifest.json"));
    EXPECT_EQ(manifest["seed"], 4);
    const std::string effective = manifest["effective_config"];
    EXPECT_NE(effective.find("horizon=12"), std::string::npos);
    EXPECT_NE(effective.find("seed=4"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir_ / "o" / "synth_0001.jsonl"));
    EXPECT_FALSE(fs::exists(dir_ / "o" / "synth_0002.jsonl"));
}

TEST_F(CliTest, FitSynthCascade)
{
    ASSERT_EQ(cli({"synth", "--seed", "5", "--n-agents", "3000", "--horizon", "30", "--out", path("s")}).code, 0);
    ASSERT_EQ(cli({"build-cascades", "--input", path("s"), "--out", path("c")}).code, 0);
    const auto r = cli({"fit", "--cascade", path("c/cascade_syn0000-000000.json"), "--model", "seiz", "--out",
                        path("f"), "--starts", "8", "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto result = nlohmann::json::parse(slurp(dir_ / "f" / "fit_seiz.json"));
    EXPECT_LE(result["error"].get<double>(), 0.05);
    EXPECT_TRUE(fs::exists(dir_ / "f" / "fit_seiz_curve.csv"));
}

TEST_F(CliTest, FitErrors)
{
    EXPECT_EQ(cli({"fit", "--cascade", path("missing.json"), "--model", "seiz"}).code, 2);
    EXPECT_EQ(cli({"fit", "--cascade", kData + "/golden/cascade_A.json", "--model", "sir"}).code, 2);
    // Four hourly points are too few to fit.
    EXPECT_EQ(cli({"fit", "--cascade", kData + "/golden/cascade_A.json", "--model", "seiz", "--out", path("f")}).code,
              2);

    std::ofstream(path("long.jsonl"))
        << R"({"id":"r","user_id":"u","ts":"2018-04-01T00:00:00Z","action":"root"})" << '\n'
        << R"({"id":"a","user_id":"v","ts":"2018-04-01T00:10:00Z","action":"retweet","parent_id":"r"})" << '\n'
        << R"({"id":"b","user_id":"w","ts":"2018-04-01T05:10:00Z","action":"retweet","parent_id":"r"})" << '\n';
    ASSERT_EQ(cli({"build-cascades", "--input", path("long.jsonl"), "--out", path("c"), "--horizon", "10"}).code, 0);
    std::ofstream(path("bounds.json")) << R"({"beta": [5000, 10000], "N": [5000, 6000]})";
    const auto r = cli({"fit", "--cascade", path("c/cascade_r.json"), "--model", "sis", "--substeps", "1",
                        "--max-evals", "30", "--starts", "2", "--bounds-file", path("bounds.json"), "--out",
                        path("f")});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("fit failed"), std::string::npos);
}

TEST_F(CliTest, CompareSingleCascade)
{
    ASSERT_EQ(cli({"synth", "--seed", "2", "--n-agents", "1500", "--horizon", "16", "--out", path("s")}).code, 0);
    ASSERT_EQ(cli({"build-cascades", "--input", path("s"), "--out", path("c")}).code, 0);
    const auto r = cli({"compare", "--input", path("c"), "--out", path("r"), "--starts", "4", "--max-evals", "600"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = nlohmann::json::parse(slurp(dir_ / "r" / "summary.json"));
    EXPECT_EQ(summary["n_cascades"], 1);
    for (const auto& t : summary["tests"])
        EXPECT_EQ(t["status"], "insufficient sample");
    for (const char* name : {"comparison.csv", "histogram.csv", "fits.csv", "manifest.json"})
        EXPECT_TRUE(fs::exists(dir_ / "r" / name)) << name;

    ASSERT_EQ(cli({"report", "--input", path("r/comparison.csv"), "--out", path("rep")}).code, 0);
    EXPECT_EQ(slurp(dir_ / "rep" / "summary.json"), slurp(dir_ / "r" / "summary.json"));
    EXPECT_EQ(slurp(dir_ / "rep" / "histogram.csv"), slurp(dir_ / "r" / "histogram.csv"));
}

TEST_F(CliTest, CompareBulkFailure)
{
    ASSERT_EQ(cli({"build-cascades", "--input", kData + "/fixture_three_roots.jsonl", "--out", path("c")}).code, 0);
    // Every fixture cascade is shorter than the minimum fitting window.
    const auto r = cli({"compare", "--input", path("c"), "--out", path("r"), "--starts", "2"});
    EXPECT_EQ(r.code, 5);
    EXPECT_TRUE(fs::exists(dir_ / "r" / "comparison.csv"));
    EXPECT_EQ(cli({"compare", "--input", path("nothing"), "--out", path("r")}).code, 2);
}

TEST_F(CliTest, UsageErrors)
{
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"--help"}).code, 0);
    EXPECT_EQ(cli({"--version"}).out, std::string(cascadefit::cli::kVersion) + "\n");
}
