#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "simgat/io.hpp"

namespace fs = std::filesystem;
using simgat::io::Json;

namespace {

struct Result {
    int status = -1;
    std::string out, err;
};

fs::path workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "simgat_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result run(const std::string& args) {
    const auto dir = workdir();
    const std::string cmd = "cd '" + dir.string() + "' && '" SIMGAT_CLI "' " + args + " >stdout.txt 2>stderr.txt";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(dir / "stdout.txt"), slurp(dir / "stderr.txt")};
}

void write_text(const std::string& name, const std::string& text) {
    std::ofstream(workdir() / name, std::ios::binary) << text;
}

Json json_at(const std::string& name) { return simgat::io::read_json(workdir() / name); }

}  // namespace

TEST_CASE("gradcheck: exit 0 and a passing JSON report") {
    const auto r = run("gradcheck --seed 1");
    REQUIRE(r.status == 0);
    const auto j = Json::parse(r.out);
    CHECK(j["pass"].get<bool>());
    CHECK(j["max_rel_error"].get<double>() < 1e-4);
    CHECK(fs::exists(workdir() / "manifest.json"));
}

TEST_CASE("usage errors exit 2 with usage text on stderr") {
    auto r = run("gradcheck --seed 1 --no-such-flag");
    CHECK(r.status == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run("").status == 2);
    CHECK(run("frobnicate").status == 2);
    CHECK(run("train --city missing.json --flows x --config y --out z").status == 2);
}

TEST_CASE("synth, train, eval: metrics written and validation loss beats the intercept") {
    REQUIRE(run("synth --seed 7 --out city").status == 0);
    for (const char* f : {"city.json", "flows.csv", "env.csv", "truth.json", "manifest.json"})
        CHECK(fs::exists(workdir() / "city" / f));
    write_text("config.json", R"({"seed": 7, "epochs": 30})");
    REQUIRE(run("train --city city/city.json --flows city/flows.csv --config config.json --out model.json").status == 0);
    REQUIRE(run("eval --model model.json --city city/city.json --flows city/flows.csv --no-baselines --out metrics.json")
                .status == 0);
    const auto m = json_at("metrics.json");
    CHECK(m["val_loss"].get<double>() < m["baselines"]["intercept"]["val_loss"].get<double>());
    CHECK(m["n_params"].get<std::size_t>() > 0);

    const auto manifest = json_at("model.manifest.json");
    CHECK(manifest["seed"] == 7);
    REQUIRE(manifest["inputs"].size() == 3);
    CHECK(manifest["inputs"][2]["sha256"].get<std::string>().size() == 64);

    const auto fit = run("fit-gravity --city city/city.json --flows city/flows.csv --method log-ols --out g.json");
    CHECK(fit.status == 0);
    CHECK(json_at("g.json")["diagnostics"].contains("n_dropped_zeros"));
    CHECK(run("fit-huff --city city/city.json --flows city/flows.csv --out h.json").status == 0);
}

TEST_CASE("validation errors exit 1 with an itemized report") {
    write_text("noseed.json", R"({"epochs": 3, "hidden": 4})");
    const auto r = run("train --city city/city.json --flows city/flows.csv --config noseed.json --out m.json");
    CHECK(r.status == 1);
    CHECK(r.err.find("missing 'seed'") != std::string::npos);
    CHECK(r.err.find("unknown key 'hidden'") != std::string::npos);
    CHECK_FALSE(fs::exists(workdir() / "m.json"));
}

TEST_CASE("cluster, network and assemble build a loadable city") {
    // Three POI blobs with distinct industry mixes.
    std::string pois = "id,x,y,naics,is_chain\n";
    const double centers[3][2] = {{2000, 2000}, {5200, 3000}, {3000, 6000}};
    const char* codes[3][2] = {{"722511", "445110"}, {"448140", "722511"}, {"713940", "452311"}};
    for (int b = 0; b < 3; ++b)
        for (int k = 0; k < 8; ++k)
            pois += "p" + std::to_string(b * 8 + k) + "," + std::to_string(centers[b][0] + 20 * (k % 3)) + "," +
                    std::to_string(centers[b][1] + 20 * (k / 3)) + "," + codes[b][k % 2] + "," + (k % 4 == 0 ? "1" : "0") +
                    "\n";
    pois += "lonely,7000,7000,722511,0\n";
    write_text("pois.csv", pois);
    REQUIRE(run("cluster --pois pois.csv --eps 200 --min-pts 5 --out clusters.json").status == 0);
    const auto cl = json_at("clusters.json");
    CHECK(cl["clusters"].size() == 3);
    CHECK(cl["noise_poi_ids"] == Json::array({"lonely"}));

    REQUIRE(run("network --nodes city/nodes.csv --edges city/edges.csv --neighborhoods city/neighborhoods.csv "
                "--clusters clusters.json --out costs.json")
                .status == 0);
    const auto costs = json_at("costs.json");
    CHECK(costs["n"] == 3);
    CHECK(costs["modes"] == Json::array({"drive", "walk_transit"}));

    REQUIRE(run("assemble --clusters clusters.json --neighborhoods city/neighborhoods.csv --env city/env.csv "
                "--costs costs.json --out assembled.json")
                .status == 0);
    const auto g = simgat::io::load_city(workdir() / "assembled.json");
    CHECK(g.n_clusters() == 3);
    CHECK(g.n_neighborhoods() == 15);

    write_text("merges.csv", "id_a,id_b\n0,2\n");
    REQUIRE(run("cluster --pois pois.csv --merges merges.csv --out merged.json").status == 0);
    CHECK(json_at("merged.json")["clusters"].size() == 2);
}

TEST_CASE("describe reports the analytic total") {
    const auto r = run("describe --dims 10,21,12,16,2");
    REQUIRE(r.status == 0);
    const auto j = Json::parse(r.out);
    CHECK(j["total"] == 3491);
    CHECK(j["analytic_total"] == 3491);
}
