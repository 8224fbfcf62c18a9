#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = oudiff::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

fs::path temp_file(const std::string& name, const std::string& body = {}) {
    const fs::path p = fs::temp_directory_path() / ("oudiff_cli_" + name);
    if (!body.empty()) std::ofstream(p) << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// value following "key": in a JSON dump
double json_number(const std::string& s, const std::string& key) {
    const auto pos = s.find("\"" + key + "\":");
    if (pos == std::string::npos) return std::nan("");
    return std::stod(s.substr(pos + key.size() + 3));
}

}  // namespace

TEST(Cli, SpeciationExample) {
    const Result r = run({"speciation", "--beta", "1", "--g", "0", "--sigma-w2", "2", "--sigma2", "1", "--m-plus2", "1",
                          "--m-minus2", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json_number(r.out, "t_s"), 0.5 * std::log(2.0), 1e-9);
    EXPECT_NE(r.out.find("\"regime\": \"speciates\""), std::string::npos);
}

TEST(Cli, CollapseExample) {
    const Result r = run({"collapse", "--alpha", "1", "--ratio", "1", "--beta", "1", "--g", "0"});
    ASSERT_EQ(r.code, 0) << r.err;
    const double tc = 0.5 * std::log(1.0 + 2.0 / (std::exp(2.0) - 1.0));
    EXPECT_NEAR(json_number(r.out, "t_c"), tc, 1e-9);
    EXPECT_NEAR(json_number(r.out, "t_c_plus"), tc, 1e-12);
    EXPECT_NEAR(json_number(r.out, "t_c_minus"), tc, 1e-12);
    EXPECT_NEAR(json_number(r.out, "t_max"), 1.0 / (std::exp(2.0) - 1.0), 1e-12);
    // key order is fixed
    EXPECT_LT(r.out.find("\"t_c\""), r.out.find("\"t_c_plus\""));
    EXPECT_LT(r.out.find("\"t_c_minus\""), r.out.find("\"t_max\""));
}

TEST(Cli, NegativeFlagValues) {
    const Result r = run({"collapse", "--g", "-0.5"});
    ASSERT_EQ(r.code, 0) << r.err;
}

TEST(Cli, UnknownFlagPrintsUsage) {
    const Result r = run({"speciation", "--bogus", "1"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("--beta"), std::string::npos);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"nonsense"}).code, 2);
}

TEST(Cli, InvalidValues) {
    EXPECT_EQ(run({"speciation", "--beta", "abc"}).code, 2);
    EXPECT_EQ(run({"speciation", "--beta", "-1"}).code, 2);
    EXPECT_EQ(run({"speciation", "--coupling", "sideways"}).code, 2);
    EXPECT_EQ(run({"collapse", "--alpha", "0"}).code, 2);
    EXPECT_EQ(run({"toy-conditional", "--schedules", "const,sometimes", "--dry-run"}).code, 2);
    EXPECT_EQ(run({"toy-conditional", "--t0", "7", "--dry-run"}).code, 2);
}

TEST(Cli, UnstableExitCode) {
    EXPECT_EQ(run({"speciation", "--g", "1.2"}).code, 3);
    const Result s = run({"stability", "--g", "0.5", "--sigma2", "1.5"});
    EXPECT_EQ(s.code, 3);
    EXPECT_NE(s.out.find("\"stable\": false"), std::string::npos);
    EXPECT_EQ(run({"stability", "--g", "0.5", "--sigma2", "1"}).code, 0);
    EXPECT_EQ(run({"collapse", "--g", "1"}).code, 3);
}

TEST(Cli, ConfigFileAndOverrides) {
    const fs::path cfg = temp_file("cfg.json", R"({"beta": 1, "g": 0, "m_plus2": 1, "m_minus2": 1})");
    const Result r = run({"speciation", "--config", cfg.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json_number(r.out, "t_s"), std::log(2.0), 1e-9);
    const Result o = run({"speciation", "--config", cfg.string(), "--m-minus2", "0"});
    EXPECT_NEAR(json_number(o.out, "t_s"), 0.5 * std::log(2.0), 1e-9);
    const Result d = run({"speciation", "--config", cfg.string(), "--m-minus2", "0.25", "--dry-run"});
    ASSERT_EQ(d.code, 0);
    EXPECT_NE(d.out.find("\"command\": \"speciation\""), std::string::npos);
    EXPECT_NEAR(json_number(d.out, "m_minus2"), 0.25, 0.0);
    EXPECT_EQ(d.out.find("t_s"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
    const fs::path unknown = temp_file("unknown.json", R"({"beta": 1, "gamma": 2})");
    EXPECT_EQ(run({"speciation", "--config", unknown.string()}).code, 2);
    const fs::path wrong = temp_file("wrong.json", R"({"beta": "one"})");
    EXPECT_EQ(run({"speciation", "--config", wrong.string()}).code, 2);
    const fs::path broken = temp_file("broken.json", "{ not json");
    EXPECT_EQ(run({"speciation", "--config", broken.string()}).code, 2);
    EXPECT_EQ(run({"speciation", "--config", "/nonexistent/dir/cfg.json"}).code, 4);
    EXPECT_EQ(run({"speciation", "--out", "/nonexistent/dir/out.json"}).code, 4);
}

TEST(Cli, SeedFallbackFromEnvironment) {
    ::setenv("OUDIFF_SEED", "77", 1);
    const Result env = run({"sample", "--dry-run"});
    const Result flag = run({"sample", "--dry-run", "--seed", "5"});
    ::unsetenv("OUDIFF_SEED");
    const Result none = run({"sample", "--dry-run"});
    EXPECT_EQ(json_number(env.out, "seed"), 77.0);
    EXPECT_EQ(json_number(flag.out, "seed"), 5.0);
    EXPECT_EQ(json_number(none.out, "seed"), 1.0);
}

TEST(Cli, CsvHeaders) {
    const Result pd = run({"phase-diagram", "--g-count", "3", "--theta-count", "2"});
    ASSERT_EQ(pd.code, 0) << pd.err;
    EXPECT_EQ(first_line(pd.out), "g,theta,regime,t_s,kappa0,g_crit");
    EXPECT_EQ(std::count(pd.out.begin(), pd.out.end(), '\n'), 7);

    const Result toy = run({"toy-conditional", "--dim", "4", "--steps", "20", "--trials", "10", "--thetas", "0",
                            "--g0s", "0.5", "--schedules", "const"});
    ASSERT_EQ(toy.code, 0) << toy.err;
    EXPECT_EQ(first_line(toy.out), "theta,g0,schedule,d_accuracy,d_mse,d_nll,acc_ci_lo,acc_ci_hi,n");

    const fs::path summary = temp_file("summary.json");
    const Result cl = run({"clone-speciation", "--dim", "2", "--steps", "30", "--repeats", "1", "--batch", "4",
                           "--baseline-factor", "1", "--scan-times", "0,1.5", "--g-values", "0",
                           "--summary", summary.string()});
    ASSERT_EQ(cl.code, 0) << cl.err;
    EXPECT_EQ(first_line(cl.out), "g,scan_t,phi_u,phi_u_lo,phi_u_hi,phi_u_ex,phi_v,phi_v_lo,phi_v_hi,phi_v_ex");
    EXPECT_NE(slurp(summary).find("\"t_spec_u\""), std::string::npos);
}

TEST(Cli, ByteIdenticalAcrossJobs) {
    const fs::path a = temp_file("a.csv"), b = temp_file("b.csv");
    const std::vector<std::string> base{"sample", "--dim", "3", "--paths", "40", "--steps", "50", "--seed", "9"};
    auto with = [&](const char* jobs, const fs::path& out) {
        auto v = base;
        v.insert(v.end(), {"--jobs", jobs, "--out", out.string()});
        return run(v);
    };
    ASSERT_EQ(with("1", a).code, 0);
    ASSERT_EQ(with("3", b).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_FALSE(slurp(a).empty());
}

TEST(Cli, SampleModes) {
    for (const char* mode : {"forward", "reverse", "flow"}) {
        const Result r = run({"sample", "--mode", mode, "--dim", "2", "--paths", "3", "--steps", "20"});
        ASSERT_EQ(r.code, 0) << mode << r.err;
        EXPECT_EQ(first_line(r.out), "path,label,x0,x1,y0,y1");
    }
    EXPECT_EQ(run({"sample", "--score", "empirical", "--dim", "2", "--paths", "2", "--steps", "20"}).code, 0);
    EXPECT_EQ(run({"sample", "--noise", "mode-shaped", "--g", "0.5", "--paths", "2", "--steps", "20"}).code, 0);
}
