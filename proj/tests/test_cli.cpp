#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string binary() {
    const char* env = std::getenv("MVLBM_BIN");
    return env != nullptr ? env : "./mvlbm";
}

int run(const std::string& args) {
    std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("mvlbm_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("definitely-not-a-subcommand") == 1);
    CHECK(run("fit") == 1);              // --data is required
    CHECK(run("simulate") == 1);         // needs --benchmark or --spec
    CHECK(run("--help") == 0);
}

TEST_CASE("missing input files exit with code 2") {
    auto dir = temp_dir("badinput");
    CHECK(run("fit --data " + (dir / "nope.json").string() + " --K 3,3 --out " +
              (dir / "out").string()) == 2);
    std::ofstream(dir / "garbage.json") << "{not json";
    CHECK(run("fit --data " + (dir / "garbage.json").string() + " --K 3,3 --out " +
              (dir / "out2").string()) == 2);
}

TEST_CASE("simulate is deterministic and honors replicate counts") {
    auto a = temp_dir("sim_a");
    auto b = temp_dir("sim_b");
    std::string base = "simulate --benchmark --n 40 --delta 0.5 --d 5 --seed 11 --replicates 2";
    REQUIRE(run(base + " --out " + a.string()) == 0);
    REQUIRE(run(base + " --out " + b.string()) == 0);
    for (const auto& rep : {"rep000", "rep001"}) {
        REQUIRE(fs::exists(a / rep / "dataset.json"));
        for (int v = 0; v < 2; ++v) {
            CHECK(slurp(a / rep / ("truth_rows_v" + std::to_string(v) + ".csv")) ==
                  slurp(b / rep / ("truth_rows_v" + std::to_string(v) + ".csv")));
            for (int s = 0; s < 4; ++s) {
                std::string csv =
                    "dataset_v" + std::to_string(v) + "_s" + std::to_string(s) + ".csv";
                CHECK(slurp(a / rep / csv) == slurp(b / rep / csv));
            }
        }
    }
    CHECK(fs::exists(a / "run_manifest.json"));
    CHECK_FALSE(fs::exists(a / "rep002"));

    // replicates differ from each other
    CHECK(slurp(a / "rep000" / "dataset_v0_s1.csv") !=
          slurp(a / "rep001" / "dataset_v0_s1.csv"));
}

TEST_CASE("fit produces a reloadable model and respects the penalty bound") {
    auto dir = temp_dir("fit");
    REQUIRE(run("simulate --benchmark --n 50 --delta 0.875 --d 5 --seed 3 --out " +
                dir.string()) == 0);
    std::string data = (dir / "rep000" / "dataset.json").string();
    auto out = dir / "fitted";
    REQUIRE(run("fit --data " + data +
                " --K 3,3 --L '3,3,3,3;3,3,3,3' --iters 25 --burn-in 15 --seed 9 --out " +
                out.string()) == 0);
    REQUIRE(fs::exists(out / "model.json"));
    CHECK(fs::exists(out / "trace.csv"));
    CHECK(fs::exists(out / "icl.json"));
    auto model = json::parse(std::ifstream(out / "model.json"));
    CHECK(model.at("K").get<std::vector<int>>() == std::vector<int>{3, 3});
    CHECK(model.at("pi").at("values").size() == 9);
    auto icl = json::parse(std::ifstream(out / "icl.json"));
    CHECK(icl.at("icl").get<double>() < 0.0);

    // lambda below 1/(K1 K2) is accepted, at the bound it is a data error
    CHECK(run("fit --data " + data +
              " --K 2,2 --L '2,2,2,2;2,2,2,2' --lambda 0.05 --iters 10 --burn-in 5 --out " +
              (dir / "lam_ok").string()) == 0);
    CHECK(run("fit --data " + data +
              " --K 2,2 --L '2,2,2,2;2,2,2,2' --lambda 0.25 --iters 10 --burn-in 5 --out " +
              (dir / "lam_bad").string()) == 2);
}

TEST_CASE("single-view fits feed the pairwise dependence test") {
    auto dir = temp_dir("pair");
    REQUIRE(run("simulate --benchmark --n 60 --delta 1.0 --d 5 --seed 21 --out " +
                dir.string()) == 0);
    std::string data = (dir / "rep000" / "dataset.json").string();
    for (int v = 0; v < 2; ++v)
        REQUIRE(run("fit --data " + data + " --view " + std::to_string(v) +
                    " --K 3 --L 3,3,3,3 --iters 25 --burn-in 15 --seed 5 --out " +
                    (dir / ("sv" + std::to_string(v))).string()) == 0);
    auto out = dir / "test";
    REQUIRE(run("test --data " + data + " --fits " + (dir / "sv0" / "model.json").string() +
                "," + (dir / "sv1" / "model.json").string() + " --B 9 --seed 2 --out " +
                out.string()) == 0);
    auto report = json::parse(std::ifstream(out / "test_report.json"));
    REQUIRE(report.at("pairs").size() == 1);
    double p = report.at("pairs")[0].at("p_value").get<double>();
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(report.at("pairs")[0].at("permutation_stats").size() == 9);
    // p-values live on the B-grid
    CHECK(9.0 * p == Catch::Approx(std::round(9.0 * p)).margin(1e-9));

    // B = 1 can only produce 0 or 1
    REQUIRE(run("test --data " + data + " --fits " + (dir / "sv0" / "model.json").string() +
                "," + (dir / "sv1" / "model.json").string() + " --B 1 --seed 2 --out " +
                (out.string() + "_b1")) == 0);
    auto r1 = json::parse(std::ifstream(fs::path(out.string() + "_b1") / "test_report.json"));
    double p1 = r1.at("pairs")[0].at("p_value").get<double>();
    CHECK((p1 == 0.0 || p1 == 1.0));
}

TEST_CASE("impute fills masked cells and eval scores them") {
    auto dir = temp_dir("impute");
    REQUIRE(run("simulate --benchmark --n 50 --delta 0.5 --d 5 --seed 31 --missing 0.1 --out " +
                dir.string()) == 0);
    auto rep = dir / "rep000";
    std::string data = (rep / "dataset.json").string();
    auto fitted = dir / "fitted";
    REQUIRE(run("fit --data " + data +
                " --K 3,3 --L '3,3,3,3;3,3,3,3' --iters 25 --burn-in 15 --seed 7 --out " +
                fitted.string()) == 0);
    auto imp = dir / "imputed";
    REQUIRE(run("impute --data " + data + " --model " + (fitted / "model.json").string() +
                " --seed 13 --out " + imp.string()) == 0);
    REQUIRE(fs::exists(imp / "imputed.json"));

    auto ev = dir / "eval";
    REQUIRE(run("eval --pred " + (fitted / "model.json").string() + " --truth-labels " +
                rep.string() + " --truth-data " + (rep / "full.json").string() +
                " --imputed " + (imp / "imputed.json").string() + " --data " + data +
                " --out " + ev.string()) == 0);
    std::string metrics = slurp(ev / "metrics.csv");
    CHECK(metrics.find("row_ari") != std::string::npos);
    CHECK(metrics.find("imputation_mae") != std::string::npos);

    // a non-dataset file passed as the imputed manifest is a data error
    CHECK(run("eval --pred " + (fitted / "model.json").string() + " --truth-data " +
              (rep / "full.json").string() + " --imputed " + (fitted / "model.json").string() +
              " --data " + data + " --out " + (ev.string() + "_bad")) == 2);
    // leaving out the mask dataset entirely is a usage error
    CHECK(run("eval --truth-data " + (rep / "full.json").string() + " --imputed " +
              (imp / "imputed.json").string() + " --out " + (ev.string() + "_bad2")) == 1);
}
