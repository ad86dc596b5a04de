#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("iterint_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result run(const std::string& args) {
    const char* bin = std::getenv("ITERINT_BIN");
    if (!bin) bin = "./iterint";
    const auto err = scratch() / "stderr.txt";
    const std::string cmd = "cd '" + scratch().string() + "' && '" + bin + "' " + args + " 2> '" + err.string() + "'";
    Result r;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, f)) > 0) r.out.append(buf, n);
    const int status = pclose(f);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

json without_timestamp(const std::string& text) {
    auto j = json::parse(text);
    j.erase("timestamp");
    return j;
}

int count_lines(const std::string& s, const std::string& prefix) {
    std::istringstream is(s);
    std::string line;
    int n = 0;
    while (std::getline(is, line))
        if (line.rfind(prefix, 0) == 0) ++n;
    return n;
}

}  // namespace

TEST(Cli, LyndonListsWords) {
    const auto r = run("lyndon --q 3 --stdout");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["format"], "iterint-report/1");
    EXPECT_EQ(j["words"].size(), 8u);
    EXPECT_EQ(j["words"][0], "112");
    EXPECT_EQ(j["config"]["q"], 3);
    // the words are also printed one per line as diagnostics
    int words = 0;
    std::istringstream is(r.err);
    std::string line;
    while (std::getline(is, line))
        if (line.size() == 3 && line.find_first_not_of("123") == std::string::npos) ++words;
    EXPECT_EQ(words, 8);
}

TEST(Cli, NothingOnStdoutWithoutFlag) {
    const auto r = run("lyndon --q 2 --out lyn.json");
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(json::parse(slurp(scratch() / "lyn.json"))["count"], 2);
}

TEST(Cli, ThornPrintsExactRationals) {
    const auto r = run("thorn --n-max 6 --stdout");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(r.err, "n="), 6);
    EXPECT_NE(r.err.find("n=2 1/9\n"), std::string::npos);
    EXPECT_NE(r.err.find("n=4 80089/31360000\n"), std::string::npos);
    for (int n : {1, 3, 5}) EXPECT_NE(r.err.find("n=" + std::to_string(n) + " 0\n"), std::string::npos);
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["values"][3]["value"], "80089/31360000");
    const auto b = run("thorn --n-max 6 --method bareiss --stdout");
    ASSERT_EQ(b.code, 0);
    EXPECT_EQ(json::parse(b.out)["values"], j["values"]);
}

TEST(Cli, IdentitiesHoldOnEveryPath) {
    const auto r = run("identities --q 2 --p 64 --paths 1000 --seed 7 --stdout");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    for (const auto& g : j["gates"]) {
        EXPECT_TRUE(g["pass"].get<bool>());
        EXPECT_LE(g["value"].get<double>(), 1e-10);
    }
    EXPECT_EQ(j["gates"].size(), 3u);
}

TEST(Cli, UsageErrorsExitTwo) {
    auto r = run("lyndon --bogus");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("couple --grid 4,8,16,32 --p-ref 100 --stdout").code, 2);
    EXPECT_EQ(run("sde --problem heston --h-grid 0.5,0.25,0.125,0.0625").code, 2);
}

TEST(Cli, FailedGateExitsOne) {
    const std::string base = "sde --problem gbm --scheme euler --h-grid 0.25,0.125,0.0625,0.03125 --paths 50 --stdout";
    const auto ok = run(base + " --expect-slope 0.5 --slope-tol 5");
    EXPECT_EQ(ok.code, 0) << ok.err;
    const auto bad = run(base + " --expect-slope 5 --slope-tol 0.1");
    EXPECT_EQ(bad.code, 1);
    const auto j = json::parse(bad.out);
    EXPECT_FALSE(j["gates"][0]["pass"].get<bool>());
    EXPECT_NE(bad.err.find("FAIL slope"), std::string::npos);
}

TEST(Cli, ReportsReproduceAcrossRunsAndThreadCounts) {
    const std::string cmds[] = {
        "couple --q 2 --grid 2,4,8,16 --p-ref 128 --paths 200 --projections 32 --kind gaussian-matched --stdout",
        "moments --q 2 --m 2 --grid 4,8,16,32 --n-mult 4 --paths 200 --check-lambda --stdout",
        "sde --problem bilinear2d --scheme taylor15 --h-grid 0.25,0.125,0.0625,0.03125 --paths 20 --refine 2 --stdout",
        "charfn --q 2 --p 8 --samples 2000 --radii 1,3 --directions 2 --stdout",
        "sample --q 2 --p 8 --paths 3 --stdout",
    };
    for (const auto& c : cmds) {
        const auto a = run(c + " --threads 1"), b = run(c + " --threads 1"), d = run(c + " --threads 4");
        ASSERT_EQ(a.code, 0) << c << "\n" << a.err;
        EXPECT_EQ(without_timestamp(a.out).dump(), without_timestamp(b.out).dump()) << c;
        EXPECT_EQ(without_timestamp(a.out).dump(), without_timestamp(d.out).dump()) << c;
    }
}

TEST(Cli, CsvMirror) {
    const auto r = run("moments --q 2 --grid 4,8,16,32 --n-mult 4 --paths 100 --format csv --stdout");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("metric,grid_value,estimate,stderr,gate,pass\n", 0), 0u);
    EXPECT_EQ(count_lines(r.out, "tail_moment_2,"), 4);
    const auto s = run("sample --q 1 --p 4 --paths 2 --format csv --stdout");
    ASSERT_EQ(s.code, 0);
    EXPECT_EQ(s.out.rfind("path_id,h,entity,indices,value\n", 0), 0u);
}

TEST(Cli, PhaseChecksPass) {
    const auto r = run("phase --q 2 --p 8 --points 5 --stdout");
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto& g : json::parse(r.out)["gates"]) EXPECT_TRUE(g["pass"].get<bool>()) << g.dump();
}
