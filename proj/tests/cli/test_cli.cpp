#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using fspn::cli::run;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result call(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

/// Fresh scratch directory per test.
fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("fspn_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kFixture = std::string(FSPN_TEST_DATA_DIR) + "/four_var_fixture.json";

std::size_t count_lines(const std::string& text) { return std::count(text.begin(), text.end(), '\n'); }

}  // namespace

TEST_CASE("infer prints one probability per query line")
{
    const auto dir = scratch("infer");
    spit(dir / "q.txt", "# fixture queries\nX1=1..7 X3=3..6\n\nX1=1..7 X3=3..5\nX1=1..7 X3=(5..6\n");
    const auto r = call({"infer", "--model", kFixture, "--query", (dir / "q.txt").string(), "--manifest",
                         (dir / "m.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "0.171\n0.051\n0.12\n");
    CHECK(fs::exists(dir / "m.json"));
}

TEST_CASE("infer csv output and evidence")
{
    const auto dir = scratch("infer_csv");
    const auto r = call({"infer", "--model", kFixture, "--expr", "X1=1..7 | X3=3..6", "--format", "csv", "--out",
                         (dir / "r.csv").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    const auto text = slurp(dir / "r.csv");
    CHECK(count_lines(text) == 2);
    CHECK(text.starts_with("query,probability\n"));
    CHECK(fs::exists(dir / "r.csv.manifest.json"));
}

TEST_CASE("bad query is a data error")
{
    const auto dir = scratch("infer_bad");
    const auto r = call({"infer", "--model", kFixture, "--expr", "Nope=1", "--manifest", (dir / "m.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("Nope") != std::string::npos);
}

TEST_CASE("usage errors exit 1")
{
    CHECK(call({}).code == 1);
    CHECK(call({"infer"}).code == 1);
    CHECK(call({"infer", "--model", kFixture, "--bogus"}).code == 1);
    CHECK(call({"stats", "--model", kFixture, "--format", "xml"}).code == 1);
    CHECK(call({"--help"}).code == 0);
}

TEST_CASE("validate flags a corrupted model")
{
    const auto dir = scratch("validate");
    CHECK(call({"validate", "--model", kFixture, "--manifest", (dir / "ok.json").string()}).code == 0);

    auto doc = nlohmann::json::parse(slurp(kFixture));
    doc["root"]["left"]["weights"][0] = 0.9;
    spit(dir / "bad.json", doc.dump());
    const auto r = call({"validate", "--model", (dir / "bad.json").string(), "--manifest", (dir / "m.json").string()});
    CHECK(r.code == 2);
    CHECK(!r.out.empty());
    const auto manifest = nlohmann::json::parse(slurp(dir / "m.json"));
    CHECK(manifest["exit_code"] == 2);

    spit(dir / "junk.json", "{\"x\": 1}");
    CHECK(call({"validate", "--model", (dir / "junk.json").string(), "--manifest", (dir / "m.json").string()}).code == 2);
}

TEST_CASE("stats reports the fixture shape")
{
    const auto dir = scratch("stats");
    const auto r = call({"stats", "--model", kFixture, "--format", "csv", "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.starts_with("nodes,factorize,sum,product,split,uni_leaf,multi_leaf,depth,params\n"));
    CHECK(count_lines(r.out) == 2);
}

TEST_CASE("gen-data, learn, eval round trip")
{
    const auto dir = scratch("pipeline");
    const auto csv = (dir / "d.csv").string();
    REQUIRE(call({"gen-data", "--rows", "2000", "--vars", "4", "--domain", "3", "--groups", "0,1;2,3", "--noise", "0.1",
                  "--seed", "3", "--out", csv})
                .code == 0);
    CHECK(count_lines(slurp(csv)) == 2001);
    CHECK(fs::exists(csv + ".spec"));

    const auto m1 = (dir / "a.json").string();
    const auto m2 = (dir / "b.json").string();
    REQUIRE(call({"learn", "--data", csv, "--seed", "7", "--out", m1}).code == 0);
    REQUIRE(call({"learn", "--data", csv, "--seed", "7", "--out", m2}).code == 0);
    CHECK(slurp(m1) == slurp(m2));

    const auto manifest = nlohmann::json::parse(slurp(m1 + ".manifest.json"));
    CHECK(manifest["subcommand"] == "learn");
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["config"]["tau_low"].is_string());
    CHECK(manifest["inputs"].size() == 1);
    CHECK(manifest["outputs"][0] == m1);

    const auto ll = call({"eval-ll", "--model", m1, "--data", csv, "--per-row", "--format", "csv", "--manifest",
                          (dir / "ll.json").string()});
    REQUIRE(ll.code == 0);
    CHECK(count_lines(ll.out) == 2002);

    const auto kl = call({"eval-kl", "--model", m1, "--truth-spec", csv + ".spec", "--format", "csv", "--manifest",
                          (dir / "kl.json").string()});
    REQUIRE(kl.code == 0);
    CHECK(kl.out.starts_with("n_nodes,avg_rdc,kl,mean_conditional_kl\n"));
    CHECK(count_lines(kl.out) == 2);

    CHECK(call({"eval-kl", "--model", m1, "--manifest", (dir / "kl.json").string()}).code == 2);
}

TEST_CASE("convert-bn then eval-kl against the same network is zero")
{
    const auto dir = scratch("bn");
    spit(dir / "net.txt", "variables\nA 2\nB 2\nedges\nA -> B\ncpt A\n0.4 0.6\ncpt B\n0 : 0.9 0.1\n1 : 0.2 0.8\n");
    const auto model = (dir / "m.json").string();
    const auto r = call({"convert-bn", "--in", (dir / "net.txt").string(), "--out", model});
    REQUIRE(r.code == 0);
    const auto kl = call({"eval-kl", "--model", model, "--truth-bn", (dir / "net.txt").string(), "--manifest",
                          (dir / "kl.json").string()});
    REQUIRE(kl.code == 0);
    CHECK(kl.out.find("kl 0\n") != std::string::npos);

    spit(dir / "cyc.txt", "variables\nA 2\nB 2\nedges\nA -> B\nB -> A\ncpt A\n0 : 0.5 0.5\n1 : 0.5 0.5\ncpt B\n0 : 0.5 0.5\n1 : 0.5 0.5\n");
    CHECK(call({"convert-bn", "--in", (dir / "cyc.txt").string(), "--out", (dir / "x.json").string()}).code == 2);
}

TEST_CASE("bench writes rows and a slope")
{
    const auto dir = scratch("bench");
    const auto r = call({"bench", "--sizes", "50,200", "--events", "5", "--reps", "3", "--format", "csv", "--manifest",
                         (dir / "m.json").string()});
    REQUIRE(r.code == 0);
    CHECK(count_lines(r.out) == 5);
    CHECK(r.out.find("# slope,") != std::string::npos);
    CHECK(call({"bench", "--sizes", "200,50", "--manifest", (dir / "m.json").string()}).code == 2);
}
