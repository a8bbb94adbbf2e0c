#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condwalk/cli.hpp"
#include "condwalk/error.hpp"
#include "oracles.hpp"

using namespace condwalk;
using namespace condwalk::cli;
namespace fs = std::filesystem;

namespace {
struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::current_path() / "cli_scratch" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("kernel examples") {
    CHECK(run({"kernel", "L", "--x", "0"}).out == "0.7978845608\n");
    CHECK(run({"kernel", "psi", "--x", "1", "--y", "0"}).out == "0\n");
    // 1 - e^{-1/2}
    const auto r = run({"kernel", "limitCdf", "--t", "0", "--u", "1"});
    CHECK(r.code == kPass);
    CHECK(std::stod(r.out) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-10));
    CHECK(run({"kernel", "H", "--x", "1"}).out == "0.6826894921\n");

    const auto table = run({"kernel", "H", "--x", "0:2:3", "--format", "csv"});
    CHECK(table.code == kPass);
    CHECK(table.out.find("x,value\n0,0\n1,") != std::string::npos);
    CHECK(table.out.rfind("# condwalk ", 0) == 0);
}

TEST_CASE("kernel usage errors") {
    CHECK(run({"kernel", "nope", "--x", "0"}).code == kUsage);
    CHECK(run({"kernel", "psi", "--x", "1"}).code == kUsage);
    CHECK(run({"kernel", "L", "--x", "a"}).code == kUsage);
    CHECK(run({}).code == kUsage);
    CHECK(run({"frobnicate"}).code == kUsage);
    CHECK(run({"--version"}).code == kPass);
}

TEST_CASE("exact examples") {
    CHECK(run({"exact", "survive", "--dist", "rademacher", "--x", "0", "--n", "3"}).out == "0.375\n");
    const auto h = run({"exact", "harmonic", "--dist", "rademacher", "--x", "5"});
    CHECK(h.code == kPass);
    CHECK(std::stod(h.out) == doctest::Approx(6.0).epsilon(1e-10));
    // the start itself is not tested: from -1 only up, up, any survives
    CHECK(run({"exact", "survive", "--x=-1", "--n", "3"}).out == "0.25\n");
    CHECK(run({"exact", "survive", "--x=-2", "--n", "1"}).out == "0\n");
    // tri: P(tau_0 > 1) = 3/4
    CHECK(run({"exact", "survive", "--dist", "tri", "--x", "0", "--n", "1"}).out == "0.75\n");
    // literal and JSON forms name the same law
    CHECK(run({"exact", "survive", "--dist", "span:1 atoms:-1:0.5,+1:0.5", "--x", "0", "--n", "3"}).out == "0.375\n");
    CHECK(run({"exact", "survive", "--dist", R"({"span":1,"atoms":[[-1,0.5],[1,0.5]]})", "--x", "0", "--n", "3"}).out ==
          "0.375\n");
}

TEST_CASE("exact survive matches the ballot formula over a grid") {
    const auto r = run({"exact", "survive", "--x", "0", "--n", "1,2,3,4,5,6,20", "--format", "csv"});
    REQUIRE(r.code == kPass);
    std::istringstream in(r.out);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
        double x = 0, v = 0;
        long n = 0;
        char c1, c2;
        std::istringstream ls(line);
        ls >> x >> c1 >> n >> c2 >> v;
        CHECK(v == doctest::Approx(static_cast<double>(oracle::binomial_half(static_cast<int>(n), static_cast<int>(n / 2)))).epsilon(1e-13));
        ++rows;
    }
    CHECK(rows == 7);
}

TEST_CASE("exact error contract") {
    CHECK(run({"exact", "survive", "--dist", "span:1 atoms:-1:0.5,+2:0.5", "--x", "0", "--n", "3"}).code == kUsage);
    CHECK(run({"exact", "survive", "--dist", "nosuch"}).code == kUsage);
    CHECK(run({"exact", "survive", "--x", "0", "--n", "100000", "--max-cells", "10"}).code == kResource);
    CHECK(run({"exact", "curve", "--x", "0,1", "--n", "3"}).code == kUsage);
    CHECK(run({"exact", "survive", "--method", "quantum"}).code == kUsage);
    CHECK(run({"exact", "survive", "--format", "xml"}).code == kUsage);
    CHECK(run({"exact", "survive", "--variant", "delta-ge-one", "--delta", "0.5"}).code == kUsage);
}

TEST_CASE("exact tables") {
    const auto mass = run({"exact", "mass", "--x", "0", "--n", "2", "--format", "csv"});
    CHECK(mass.out.find("position,mass\n0,0.25\n1,0\n2,0.25\n") != std::string::npos);
    const auto curve = run({"exact", "curve", "--x", "0", "--n", "3", "--format", "csv"});
    CHECK(curve.out.find("n,survival\n1,0.5\n2,0.5\n3,0.375\n") != std::string::npos);
    const auto en = run({"exact", "enumerate", "--x", "0", "--n", "2", "--format", "csv"});
    CHECK(en.out.find("position,mass\n0,0.25\n2,0.25\n") != std::string::npos);

    const auto cdf = run({"exact", "cdf", "--x", "0", "--n", "2", "--u", "0,1,2", "--format", "json"});
    REQUIRE(cdf.code == kPass);
    const auto j = nlohmann::json::parse(cdf.out);
    REQUIRE(j.at("rows").size() == 3);
    // positions 0 and 2 at scale sqrt(2): half the mass sits at u = 0
    CHECK(j["rows"][0]["value"].get<double>() == 0.5);
    CHECK(j["rows"][1]["value"].get<double>() == 0.5);
    CHECK(j["rows"][2]["value"].get<double>() == 1.0);
    CHECK(j.at("meta").at("config_hash").get<std::string>().size() == 16);
}

TEST_CASE("mc examples and determinism") {
    const std::vector<std::string> base = {"mc", "survive", "--dist", "rademacher", "--x", "0", "--n", "2",
                                           "--trials", "100000", "--seed", "7"};
    const auto a = run(base);
    REQUIRE(a.code == kPass);
    const double p = std::stod(a.out);
    const double hw = std::stod(a.out.substr(a.out.find("+-") + 2));
    CHECK(std::abs(p - 0.5) <= hw);
    CHECK(run(base).out == a.out);
    auto more = base;
    more.insert(more.end(), {"--workers", "5"});
    CHECK(run(more).out == a.out);

    for (const char* op : {"survive", "cdf", "harmonic"}) {
        CAPTURE(op);
        std::vector<std::string> args = {"mc", op, "--dist", "tri", "--x", "3", "--n", "64", "--trials", "3000",
                                         "--horizon", "5000", "--format", "csv"};
        const auto one = run(args);
        REQUIRE(one.code == kPass);
        args.insert(args.end(), {"--workers", "4"});
        CHECK(run(args).out == one.out);
    }
}

TEST_CASE("list parsing") {
    CHECK(parse_real_list("0,0.5,2") == std::vector<double>{0, 0.5, 2});
    CHECK(parse_real_list("0:1:5") == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
    CHECK(parse_int_list("64,256") == std::vector<long>{64, 256});
    CHECK_THROWS_AS(parse_real_list("1,,2"), ConfigError);
    CHECK_THROWS_AS(parse_real_list("1:0:3"), ConfigError);
    CHECK_THROWS_AS(parse_int_list("1.5"), ConfigError);
    CHECK_THROWS_AS(parse_real_list("inf"), ConfigError);
}

TEST_CASE("config round-trip and hash") {
    RunConfig c;
    c.distribution = "span:1 atoms:-1:0.75,+3:0.25";
    c.x_grid = {"0", "t1.5"};
    c.n_grid = {8, 16};
    c.u_grid = {0, 0.5, 1};
    c.trials = 1234;
    c.seed = 99;
    c.method = "mc";
    c.remainder_variant = "delta-ge-one";
    c.remainder_delta = 2;
    c.format = "json";
    const auto back = RunConfig::from_json(nlohmann::json::parse(c.canonical()));
    CHECK(back == c);
    CHECK(back.canonical() == c.canonical());
    CHECK(back.hash() == c.hash());
    CHECK(RunConfig().hash() != c.hash());
    CHECK(RunConfig::from_json(nlohmann::json::object()) == RunConfig());

    CHECK_THROWS_AS(RunConfig::from_json({{"worker", 3}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"trials", "many"}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"remainder", {{"variant", "general"}, {"extra", 1}}}}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json({{"u_grid", {1, 0}}}), Error);
    // "rademacher" canonicalises to its literal
    CHECK(RunConfig::from_json({{"distribution", "rademacher"}}) == RunConfig());
}

TEST_CASE("config file precedence") {
    const auto dir = scratch("config");
    RunConfig c;
    c.x_grid = {"0"};
    c.n_grid = {3};
    {
        std::ofstream(dir / "c.json") << c.to_json().dump();
    }
    const std::string file = (dir / "c.json").string();
    CHECK(run({"exact", "survive", "--config", file}).out == "0.375\n");
    // flags beat the file
    CHECK(run({"exact", "survive", "--config", file, "--n", "1"}).out == "0.5\n");

    const auto dumped = run({"exact", "survive", "--config", file, "--dump-config"});
    CHECK(RunConfig::from_json(nlohmann::json::parse(dumped.out)) == c);

    {
        std::ofstream(dir / "bad.json") << "{\"trials\": ";
    }
    CHECK(run({"exact", "survive", "--config", (dir / "bad.json").string()}).code == kUsage);
    CHECK(run({"exact", "survive", "--config", (dir / "missing.json").string()}).code == kUsage);
}

TEST_CASE("output files carry version and config hash") {
    const auto dir = scratch("files");
    const auto out = dir / "s.csv";
    const auto r = run({"exact", "survive", "--x", "0,1", "--n", "4", "--format", "csv", "-o", out.string()});
    REQUIRE(r.code == kPass);
    CHECK(r.out.empty());
    const auto text = slurp(out);
    RunConfig c;
    c.x_grid = {"0", "1"};
    c.n_grid = {4};
    c.format = "csv";
    c.output = out.string();
    CHECK(text.find(std::string("# condwalk ") + std::string(version())) == 0);
    CHECK(text.find("# config_hash " + c.hash()) != std::string::npos);
    CHECK(text.find("# config " + c.canonical()) != std::string::npos);
}

TEST_CASE("verify writes reports and follows the exit contract") {
    const auto dir = scratch("verify");
    const auto r = run({"verify", "persistence", "--dist", "rademacher", "-o", dir.string()});
    CHECK(r.code == kPass);
    for (const char* f : {"persistence.csv", "persistence_checks.csv", "persistence.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / f));
    }
    const auto j = nlohmann::json::parse(slurp(dir / "persistence.json"));
    CHECK(j.at("pass").get<bool>());
    CHECK(j.at("meta").at("version").get<std::string>() == version());
    CHECK(j.at("rows").is_array());
    CHECK(slurp(dir / "persistence.csv").find("# config_hash ") != std::string::npos);

    const auto lem = run({"verify", "lemmas", "-o", dir.string()});
    CHECK(lem.code == kAssertionFailed);
    CHECK(lem.err.find("first violation") != std::string::npos);

    CHECK(run({"verify", "everything"}).code == kUsage);
}

TEST_CASE("verify output directory from the environment") {
    const auto dir = scratch("env");
    ::setenv("CONDWALK_OUTPUT_DIR", dir.string().c_str(), 1);
    const auto r = run({"verify", "clt", "--x", "0", "--n", "64,256"});
    ::unsetenv("CONDWALK_OUTPUT_DIR");
    CHECK(r.code == kPass);
    CHECK(fs::exists(dir / "clt.csv"));
    CHECK(fs::exists(dir / "clt_summary.csv"));
}

TEST_CASE("verify output is byte-identical across worker counts") {
    const auto a = scratch("workers");
    // identical output path so the embedded config matches
    const std::vector<std::string> base = {"verify", "persistence", "--method", "mc", "--trials", "2000",
                                           "--x", "0,t1", "--n", "64,256", "-o"};
    auto args = base;
    args.push_back(a.string());
    const auto r1 = run(args);
    const auto f1 = slurp(a / "persistence.csv");
    fs::remove(a / "persistence.csv");
    args.insert(args.end(), {"--workers", "4"});
    const auto r4 = run(args);
    CHECK(r1.out == r4.out);
    CHECK(slurp(a / "persistence.csv") == f1);
    CHECK(f1.find("mc") != std::string::npos);
}
