#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ifg/cli.hpp"
#include "ifg/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result ifg_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = ifg::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "ifg_cli_test" / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

fs::path write_config(const std::string& name, const json& doc) {
    const fs::path p = fs::temp_directory_path() / "ifg_cli_test" / (name + ".json");
    fs::create_directories(p.parent_path());
    std::ofstream(p) << doc.dump(2);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

void check_artifacts(const fs::path& dir) {
    for (const char* f : {"manifest.json", "metrics.csv", "acceptance.json", "config.json"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
}

void check_same_tree(const fs::path& a, const fs::path& b) {
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        CHECK_MESSAGE(slurp(e.path()) == slurp(b / e.path().filename()), e.path().filename().string());
    }
    CHECK(files >= 4);
}

const json kSmallFlow = {{"stages", {{{"field", "sin_bump"}}}},
                         {"n", 4},
                         {"integrator", {{"steps", 64}}},
                         {"reference", {{"steps", 512}}},
                         {"eval_grid", 9}};

} // namespace

TEST_CASE("help and usage errors") {
    CHECK(ifg_run({"--help"}).code == 0);
    CHECK(ifg_run({"--version"}).code == 0);
    CHECK(ifg_run({}).code == 2);
    CHECK(ifg_run({"frobnicate"}).code == 2);
    CHECK(ifg_run({"approx-flow"}).code == 2);
}

TEST_CASE("approx-flow happy path matches the golden metrics") {
    const fs::path out = scratch("flow_a");
    const Result r = ifg_run({"approx-flow", "-c", write_config("small_flow", kSmallFlow).string(), "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    check_artifacts(out);
    CHECK(fs::exists(out / "flow_error.csv"));

    const auto got = read_csv(slurp(out / "metrics.csv"));
    const auto want = read_csv(slurp(fs::path(IFG_GOLDEN_DIR) / "approx_flow_sin_bump_n4.csv"));
    REQUIRE(got.size() == want.size());
    CHECK(got[0] == want[0]);
    for (std::size_t i = 1; i < got.size(); ++i) {
        REQUIRE(got[i].size() == want[i].size());
        for (std::size_t j = 0; j < got[i].size(); ++j) {
            const double a = std::stod(got[i][j]), b = std::stod(want[i][j]);
            CHECK_MESSAGE(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)), want[0][j]);
        }
    }

    const json m = read_json(out / "manifest.json");
    CHECK(m["command"] == "approx-flow");
    CHECK(m["measured_flow_error"].get<double>() <= m["certificate"]["total_bound"].get<double>());
    CHECK(m["measured_flow_error"].get<double>() == doctest::Approx(0.34191118729300907).epsilon(1e-9));
    CHECK(read_json(out / "acceptance.json")["passed"] == true);
    CHECK(!read_json(out / "config.json").contains("output"));

    SUBCASE("deterministic") {
        const fs::path again = scratch("flow_b");
        REQUIRE(ifg_run({"approx-flow", "-c", write_config("small_flow", kSmallFlow).string(), "-o", again.string()}).code == 0);
        check_same_tree(out, again);
    }
    SUBCASE("verify") {
        const Result v = ifg_run({"verify", out.string(), "--remeasure"});
        CHECK_MESSAGE(v.code == 0, v.out);
        json m2 = m;
        m2["certificate"]["total_bound"] = 1e-9;
        const fs::path tampered = scratch("tampered");
        fs::create_directories(tampered);
        std::ofstream(tampered / "manifest.json") << m2.dump();
        CHECK(ifg_run({"verify", tampered.string()}).code == 4);
        json m3 = m;
        m3["approximant"]["stages"][0]["lipschitz"] = 1.0;
        std::ofstream(tampered / "manifest.json") << m3.dump();
        CHECK(ifg_run({"verify", tampered.string()}).code == 2);
        CHECK(ifg_run({"verify", (tampered / "missing.json").string()}).code == 2);
    }
}

TEST_CASE("approx-flow zero field gives the identity") {
    const fs::path out = scratch("zero");
    const json cfg = {{"stages", {{{"field", {{"id", "zero"}, {"params", {{"dim", 2}}}}}}}}, {"n", 2}, {"eval_grid", 5}};
    const Result r = ifg_run({"approx-flow", "-c", write_config("zero", cfg).string(), "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const json m = read_json(out / "manifest.json");
    CHECK(m["certificate"]["total_bound"].get<double>() == 0.0);
    CHECK(m["measured_flow_error"].get<double>() == 0.0);
}

TEST_CASE("malformed configs exit 2 without artifacts") {
    const fs::path out = scratch("malformed");
    const std::vector<json> bad = {
        {{"stages", {{{"field", "nope"}}}}, {"n", 4}},
        {{"stages", {{{"field", "sin_bump"}}}}, {"n", 0}},
        {{"stages", {{{"field", "sin_bump"}}}}, {"n", -3}},
        {{"stages", {{{"field", "sin_bump"}}}}, {"n", 4}, {"typo", true}},
        {{"stages", json::array()}, {"n", 4}},
        {{"stages", {{{"field", {{"id", "rotation"}, {"params", {{"center", {0.5, 0.5}}, {"rate", 1.0}}}}}}}}, {"n", 4}},
        {{"stages", {{{"field", "sin_bump"}}}}, {"n", 4}, {"integrator", {{"method", "leapfrog"}}}},
        {{"stages", {{{"field", "sin_bump"}}}}, {"n", "four"}},
    };
    for (std::size_t i = 0; i < bad.size(); ++i) {
        const Result r = ifg_run({"approx-flow", "-c", write_config("bad" + std::to_string(i), bad[i]).string(), "-o",
                                  out.string()});
        CHECK_MESSAGE(r.code == 2, bad[i].dump());
        CHECK(!r.err.empty());
        CHECK(!fs::exists(out));
    }
    const fs::path broken = fs::temp_directory_path() / "ifg_cli_test" / "broken.json";
    std::ofstream(broken) << "{\"n\": ";
    CHECK(ifg_run({"approx-flow", "-c", broken.string(), "-o", out.string()}).code == 2);
    CHECK(ifg_run({"approx-flow", "-c", "/nonexistent/config.json", "-o", out.string()}).code == 2);
    CHECK(ifg_run({"approx-flow", "-c", write_config("no_output", kSmallFlow).string()}).code == 2);
    CHECK(!fs::exists(out));
}

TEST_CASE("lift-approx") {
    const fs::path out = scratch("lift");
    const json cfg = {{"functions", {{{"id", "sin"}, {"dim", 1}, {"params", {{"freq", 3.0}}}}}}, {"n", {8, 16}}};
    const Result r = ifg_run({"lift-approx", "-c", write_config("lift", cfg).string(), "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, (r.err + r.out));
    const json m = read_json(out / "manifest.json");
    CHECK(m["runs"].size() == 2);
    CHECK(m["exact_lift_error"].get<double>() <= 1e-12);
    CHECK(ifg_run({"verify", out.string()}).code == 0);

    const fs::path zero = scratch("lift_zero");
    const json zcfg = {{"functions", {{{"id", "zero"}, {"dim", 2}}}}, {"n", {4}}, {"eval_points", 5}};
    REQUIRE(ifg_run({"lift-approx", "-c", write_config("lift_zero", zcfg).string(), "-o", zero.string()}).code == 0);
    CHECK(read_json(zero / "manifest.json")["runs"][0]["measured_error"][0].get<double>() == 0.0);

    const json bad = {{"functions", {{{"id", "cosh"}, {"dim", 1}}}}};
    CHECK(ifg_run({"lift-approx", "-c", write_config("lift_bad", bad).string(), "-o", zero.string() + "x"}).code == 2);
}

TEST_CASE("generate") {
    const json cfg = {{"generator", "rotation"}, {"seed", 5},    {"N_list", {8, 64}}, {"trials", 6},
                      {"proxy_size", 256},       {"delta", 0.1}, {"integrator", {{"steps", 32}}}};
    const fs::path a = scratch("gen_a"), b = scratch("gen_b");
    const Result r = ifg_run({"generate", "-c", write_config("gen", cfg).string(), "-o", a.string()});
    REQUIRE_MESSAGE(r.code == 0, (r.err + r.out));
    REQUIRE(ifg_run({"generate", "-c", write_config("gen", cfg).string(), "-o", b.string()}).code == 0);
    check_same_tree(a, b);
    CHECK(fs::exists(a / "samples.csv"));
    CHECK(read_csv(slurp(a / "concentration.csv")).size() == 13);
    CHECK(ifg_run({"verify", a.string()}).code == 0);

    json no_seed = cfg;
    no_seed.erase("seed");
    CHECK(ifg_run({"generate", "-c", write_config("gen_noseed", no_seed).string(), "-o", scratch("x").string()}).code == 2);
    json decreasing = cfg;
    decreasing["N_list"] = {64, 8};
    CHECK(ifg_run({"generate", "-c", write_config("gen_dec", decreasing).string(), "-o", scratch("x").string()}).code == 2);

    SUBCASE("from an approx-flow run, with an input measure") {
        const fs::path flow = scratch("gen_flow");
        REQUIRE(ifg_run({"approx-flow", "-c", write_config("small_flow", kSmallFlow).string(), "-o", flow.string()}).code == 0);
        const fs::path csv = fs::temp_directory_path() / "ifg_cli_test" / "input.csv";
        std::ofstream(csv) << "x0,x1\n0.25,0.5\n0.75,0.5\n";
        json c2 = cfg;
        c2["generator"] = {{"manifest", flow.string()}};
        c2["input"] = csv.string();
        const fs::path out = scratch("gen_c");
        const Result r2 = ifg_run({"generate", "-c", write_config("gen2", c2).string(), "-o", out.string()});
        REQUIRE_MESSAGE(r2.code == 0, (r2.err + r2.out));
        const json m = read_json(out / "manifest.json");
        CHECK(m["summary"][0]["terms"]["epsilon"].get<double>() > 0.0);
        CHECK(read_csv(slurp(out / "pushforward.csv")).size() == 3);
    }
}

TEST_CASE("probe-flowability") {
    const json cfg = {{"generator", "counterexample"},
                      {"seed", 2},
                      {"line", {{"normal", {1.0, 0.0}}, {"offset", 0.5}}},
                      {"fit", {{"budget", 300}}}};
    const fs::path out = scratch("probe");
    const Result r = ifg_run({"probe-flowability", "-c", write_config("probe", cfg).string(), "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, (r.err + r.out));
    const json m = read_json(out / "manifest.json");
    CHECK(std::abs(m["best"]["start"][0].get<double>() - 0.5) <= 1e-4);
    CHECK(m["contraction"]["max_ratio"].get<double>() <= 0.9);
    CHECK(m["fit"]["target"]["evaluations"].get<std::size_t>() <= 300);
    CHECK(fs::exists(out / "orbits.csv"));
    CHECK(ifg_run({"verify", out.string(), "--remeasure"}).code == 0);

    // a single squeeze has no period-2 points: acceptance failure, artifacts still written
    const json sq = {{"generator", "squeeze"}, {"seed", 2}, {"fit", {{"enabled", false}}}};
    const fs::path out2 = scratch("probe_sq");
    CHECK(ifg_run({"probe-flowability", "-c", write_config("probe_sq", sq).string(), "-o", out2.string()}).code == 4);
    CHECK(read_json(out2 / "acceptance.json")["passed"] == false);

    json bad = cfg;
    bad["contraction"] = {{"radius", -1.0}};
    CHECK(ifg_run({"probe-flowability", "-c", write_config("probe_bad", bad).string(), "-o", scratch("y").string()}).code == 2);
}

TEST_CASE("bench") {
    const json cfg = {{"seed", 1}, {"repeats", 1}, {"grid_n", {2}}, {"w1_sizes", {16}}, {"flow_points", 4}};
    const fs::path out = scratch("bench");
    const Result r = ifg_run({"bench", "-c", write_config("bench", cfg).string(), "-o", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(read_csv(slurp(out / "metrics.csv")).size() == 5);
    CHECK(ifg_run({"verify", out.string()}).code == 0);
}
