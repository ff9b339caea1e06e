#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "tiltxter/commands.hpp"
#include "tiltxter/manifest.hpp"

namespace fs = std::filesystem;
using namespace tiltxter::cli;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "tiltxter");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json manifest_of(const fs::path& output) {
    return nlohmann::json::parse(slurp(manifest_path_for(output.string())));
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("tiltxter_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                           "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST(Manifest, Sha256KnownValue) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_THROW(digest_file("/nonexistent/file"), std::runtime_error);
}

TEST(CliUsage, HelpAndErrors) {
    auto r = run_cli({"--help"});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_NE(r.out.find("gen-dataset"), std::string::npos);
    EXPECT_NE(r.out.find("serve-local"), std::string::npos);

    EXPECT_EQ(run_cli({}).code, kExitUsage);
    EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run_cli({"train", "--data", "x.ds"}).code, kExitUsage);  // --out missing
    EXPECT_EQ(run_cli({"gen-dataset", "--out", "x", "--reps", "many"}).code, kExitUsage);
    EXPECT_EQ(run_cli({"eval", "--data", "x", "--split", "holdout"}).code, kExitUsage);
}

TEST(CliUsage, MissingInputIsADomainError) {
    const auto r = run_cli({"train", "--data", "/nonexistent/data.ds", "--out", "/tmp/never.ckpt"});
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find("/nonexistent/data.ds"), std::string::npos);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST(CliUsage, BadValuesAreDomainErrors) {
    EXPECT_EQ(run_cli({"bench", "--mode", "telepathy"}).code, kExitDomain);
    EXPECT_EQ(run_cli({"episode", "--agent", "psychic", "--mode", "none"}).code, kExitUsage);
    EXPECT_EQ(run_cli({"episode", "--agent", "blind", "--mode", "pattern"}).code, kExitDomain);  // no checkpoint
    EXPECT_EQ(run_cli({"serve-remote", "--listen", "host:notaport", "--ticks", "1"}).code, kExitDomain);
}

TEST_F(Cli, PipelineEndToEnd) {
    const auto ds = path("a.ds"), ds2 = path("b.ds");
    auto r = run_cli({"gen-dataset", "--out", ds, "--reps", "1", "--seed", "3"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("wrote 279 records"), std::string::npos);
    ASSERT_EQ(run_cli({"gen-dataset", "--out", ds2, "--reps", "1", "--seed", "3"}).code, kExitOk);
    EXPECT_EQ(slurp(ds), slurp(ds2));

    const auto m = manifest_of(ds);
    EXPECT_EQ(m.at("command"), "gen-dataset");
    EXPECT_EQ(m.at("seeds").at("seed"), 3);
    EXPECT_EQ(m.at("outputs").at(0).at("sha256"), digest_file(ds).sha256);
    EXPECT_EQ(m.at("version"), kToolVersion);

    const auto ck = path("m.ckpt"), ck2 = path("m2.ckpt");
    r = run_cli({"train", "--data", ds, "--out", ck, "--epochs", "2", "--batch", "16"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("test accuracy"), std::string::npos);
    EXPECT_NE(r.out.find("confusion"), std::string::npos);
    ASSERT_EQ(run_cli({"train", "--data", ds, "--out", ck2, "--epochs", "2", "--batch", "16"}).code, kExitOk);
    EXPECT_EQ(slurp(ck), slurp(ck2));
    EXPECT_TRUE(fs::exists(ck + ".curve.csv"));
    const auto tm = manifest_of(ck);
    EXPECT_EQ(tm.at("inputs").at(0).at("sha256"), digest_file(ds).sha256);
    EXPECT_EQ(tm.at("outputs").at(0).at("sha256"), digest_file(ck).sha256);

    r = run_cli({"eval", "--data", ds, "--ckpt", ck, "--split", "test", "--csv", path("conf.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("accuracy"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("conf.csv")));

    r = run_cli({"eval", "--data", ds});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("untrained"), std::string::npos);

    r = run_cli({"render", "--ckpt", ck, "--in", ds, "--mode", "pattern", "--out", path("r.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto csv = slurp(path("r.csv"));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 279);

    r = run_cli({"render", "--in", ds, "--mode", "pattern", "--out", path("r2.csv")});
    EXPECT_EQ(r.code, kExitDomain);

    r = run_cli({"bench", "--ticks", "50", "--mode", "pattern", "--ckpt", ck, "--csv", path("bench.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("p99 total"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("bench.csv")));

    r = run_cli({"episode", "--agent", "oracle", "--trials", "7", "--mode", "all", "--ckpt", ck, "--csv",
                 path("ep.csv")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("downsize"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("ep.csv")));
}

TEST_F(Cli, CorruptCheckpointIsReported) {
    const auto ds = path("a.ds"), ck = path("bad.ckpt");
    ASSERT_EQ(run_cli({"gen-dataset", "--out", ds, "--reps", "1"}).code, kExitOk);
    std::ofstream(ck, std::ios::binary) << "TXMD not really a checkpoint";
    const auto r = run_cli({"eval", "--data", ds, "--ckpt", ck});
    EXPECT_EQ(r.code, kExitDomain);
    EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
}

TEST_F(Cli, ServeRemoteRunsForFixedTicks) {
    const auto r = run_cli({"serve-remote", "--listen", "127.0.0.1:0", "--ticks", "10"});
    EXPECT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("ticks 10"), std::string::npos);
}
