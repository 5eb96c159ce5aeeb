#include <gtest/gtest.h>

#include <sstream>

#include "biopar/cli.hpp"
#include "support.hpp"

using namespace biopar;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "biopar");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::vector<fs::path> listing(const fs::path& dir) {
    std::vector<fs::path> v;
    for (const auto& e : fs::directory_iterator(dir)) v.push_back(e.path());
    std::sort(v.begin(), v.end());
    return v;
}

const std::vector<std::string> kQuickGpr{"--restarts", "1", "--max-iter", "20", "--hyperopt-subset", "100"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST(Cli, SimulateDefaultSize) {
    testutil::TempDir dir;
    const auto csv = (dir / "db.csv").string();
    const auto r = run({"simulate", "--n", "2950", "--out", csv});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("wrote 2950 records"), std::string::npos);
    const auto db = simdb::import_simulations(csv);
    EXPECT_EQ(db.size(), 2950u);
    EXPECT_DOUBLE_EQ(db.meta.noise_sigma, 0.015);

    const auto manifest = nlohmann::json::parse(testutil::slurp(csv + ".manifest.json"));
    EXPECT_EQ(manifest["command"], "simulate");
    EXPECT_EQ(manifest["tool"], "biopar");
    EXPECT_EQ(manifest["config"]["simulate"]["n"], 2950);
    EXPECT_EQ(manifest["config"]["seed"], 0);
    EXPECT_EQ(manifest["outputs"], nlohmann::json::array({csv}));
}

TEST(Cli, SimulateIsDeterministic) {
    testutil::TempDir dir;
    const auto a = (dir / "a.csv").string(), b = (dir / "b.csv").string(), c = (dir / "c.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "50", "--seed", "4", "--out", a}).code, 0);
    ASSERT_EQ(run({"simulate", "--n", "50", "--seed", "4", "--out", b}).code, 0);
    ASSERT_EQ(run({"simulate", "--n", "50", "--seed", "5", "--out", c}).code, 0);
    EXPECT_EQ(testutil::slurp(a), testutil::slurp(b));
    EXPECT_NE(testutil::slurp(a), testutil::slurp(c));
}

TEST(Cli, SimulateWritesScene) {
    testutil::TempDir dir;
    const auto scene = (dir / "scene.bin").string();
    const auto r = run({"simulate", "--n", "20", "--out", (dir / "db.csv").string(), "--scene-out", scene,
                        "--scene-size", "8x4", "--scene-err", "0.02"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = raster::read_scene(scene);
    EXPECT_EQ(s.width, 8);
    EXPECT_EQ(s.height, 4);
    EXPECT_NEAR(s.err[1][5], 0.02, 1e-12);
    EXPECT_EQ(run({"simulate", "--n", "20", "--out", (dir / "x.csv").string(), "--scene-out", scene, "--scene-size", "8by4"}).code, 2);
}

TEST(Cli, TrainPredictPipeline) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), model = (dir / "m.bin").string(), input = (dir / "pts.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "200", "--out", db}).code, 0);
    const auto tr = run(concat({"train", "--db", db, "--out", model}, kQuickGpr));
    ASSERT_EQ(tr.code, 0) << tr.err;
    EXPECT_TRUE(fs::exists(model + ".manifest.json"));

    const std::string points = "red,nir,mir\n0.05,0.35,0.2\n0.1,0.3,0.25\n0.2,0.25,0.35\n";
    testutil::write_text(input, points);
    const auto pr = run({"predict", "--model", model, "--input", input, "--out", (dir / "pred.csv").string()});
    ASSERT_EQ(pr.code, 0) << pr.err;
    std::istringstream lines(pr.out);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "lai,fvc,fapar,sigma_lai,sigma_fvc,sigma_fapar");
    std::string line;
    int rows = 0;
    while (std::getline(lines, line)) {
        ++rows;
        std::stringstream cells(line);
        std::string cell;
        int n = 0;
        while (std::getline(cells, cell, ',')) {
            EXPECT_TRUE(std::isfinite(std::stod(cell))) << line;
            if (n >= 3) {
                EXPECT_GT(std::stod(cell), 0.0) << line;
            }
            ++n;
        }
        EXPECT_EQ(n, 6);
    }
    EXPECT_EQ(rows, 3);
    EXPECT_EQ(testutil::slurp(dir / "pred.csv"), pr.out);
    // Inputs are not touched.
    EXPECT_EQ(testutil::slurp(input), points);

    // Prediction agrees with the library on the saved model.
    Matrix x(1, 3);
    x << 0.05, 0.35, 0.2;
    const auto direct = predict_gpr(std::get<GprModel>(load_model(fs::path(model))), x);
    EXPECT_NEAR(std::stod(pr.out.substr(header.size() + 1)), direct.mean(0, 0), 1e-9);
}

TEST(Cli, PredictWithoutSigma) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), model = (dir / "k.bin").string(), input = (dir / "pts.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "150", "--out", db}).code, 0);
    ASSERT_EQ(run({"train", "--db", db, "--method", "krr", "--mode", "single", "--cv-subset", "100", "--folds", "3", "--out", model}).code, 0);
    testutil::write_text(input, "nir,red,mir\n0.35,0.05,0.2\n");
    const auto pr = run({"predict", "--model", model, "--input", input, "--manifest", (dir / "p.json").string()});
    ASSERT_EQ(pr.code, 0) << pr.err;
    EXPECT_NE(pr.out.find(",nan,nan,nan"), std::string::npos) << pr.out;
    EXPECT_TRUE(fs::exists(dir / "p.json"));
}

TEST(Cli, LutAndRetrieve) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), model = (dir / "m.bin").string(), lut = (dir / "u.lut").string();
    const auto scene = (dir / "scene.bin").string();
    ASSERT_EQ(run({"simulate", "--n", "150", "--out", db, "--scene-out", scene, "--scene-size", "6x5"}).code, 0);
    ASSERT_EQ(run(concat({"train", "--db", db, "--out", model}, kQuickGpr)).code, 0);
    const auto bl = run({"build-lut", "--model", model, "--out", lut, "--m", "10", "--k0-step", "0.35", "--err-levels", "0.01,0.03",
                         "--workers", "2"});
    ASSERT_EQ(bl.code, 0) << bl.err;
    const auto table = load_lut(lut);
    EXPECT_EQ(table.axes.node_count(), 3u * 3u * 3u * 2u);
    EXPECT_EQ(table.meta["M"], 10);

    const auto rt = run({"retrieve", "--model", model, "--scene", scene, "--lut", lut, "--out-dir", dir.path().string(),
                         "--period-end", "20260120"});
    ASSERT_EQ(rt.code, 0) << rt.err;
    const auto prod_path = dir / "biopar_GLOBE_202601200000";
    ASSERT_TRUE(fs::exists(prod_path));
    const auto prod = retrieval::decode_product(prod_path);
    EXPECT_EQ(prod.width, 6);
    EXPECT_EQ(prod.metadata["uncertainty"], "lut");
    EXPECT_EQ(prod.metadata["period_end"], "20260120");

    const auto direct = run({"retrieve", "--model", model, "--scene", scene, "--out", (dir / "direct").string(), "--mc-samples", "10"});
    ASSERT_EQ(direct.code, 0) << direct.err;
    EXPECT_EQ(retrieval::decode_product(dir / "direct").metadata["uncertainty"], "direct-mc");

    EXPECT_EQ(run({"retrieve", "--model", model, "--scene", scene}).code, 2);
    EXPECT_EQ(run({"retrieve", "--model", model, "--scene", scene, "--out", (dir / "x").string(), "--period-end", "2026"}).code, 2);
}

TEST(Cli, RetrieveNeedsGprModel) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), model = (dir / "k.bin").string(), scene = (dir / "s.bin").string();
    ASSERT_EQ(run({"simulate", "--n", "100", "--out", db, "--scene-out", scene, "--scene-size", "2x2"}).code, 0);
    ASSERT_EQ(run({"train", "--db", db, "--method", "nn", "--epochs", "5", "--nn-inits", "1", "--out", model}).code, 0);
    const auto r = run({"retrieve", "--model", model, "--scene", scene, "--out", (dir / "p").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("GPR"), std::string::npos);
}

TEST(Cli, UnknownSubcommandWritesNothing) {
    testutil::TempDir dir;
    const auto r = run({"frobnicate", "--out", (dir / "x.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(listing(dir.path()).empty());
    EXPECT_EQ(run({}).code, 2);
}

TEST(Cli, UsageErrors) {
    testutil::TempDir dir;
    EXPECT_EQ(run({"simulate", "--n", "10"}).code, 2);  // --out missing
    EXPECT_EQ(run({"simulate", "--n", "10", "--out", (dir / "a.csv").string(), "--bogus", "1"}).code, 2);
    EXPECT_EQ(run({"simulate", "--n", "ten", "--out", (dir / "a.csv").string()}).code, 2);
    EXPECT_EQ(run({"simulate", "--n", "0", "--out", (dir / "a.csv").string()}).code, 2);
    EXPECT_EQ(run({"simulate", "--n", "10", "--workers", "0", "--out", (dir / "a.csv").string()}).code, 2);
    const auto missing = run({"train", "--db", (dir / "nope.csv").string(), "--out", (dir / "m.bin").string()});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("nope.csv"), std::string::npos);
    EXPECT_EQ(run({"train", "--db", (dir / "nope.csv").string()}).code, 2);
    EXPECT_TRUE(listing(dir.path()).empty());
}

TEST(Cli, ConfigSchemaErrors) {
    testutil::TempDir dir;
    const auto out = (dir / "a.csv").string();
    auto with_config = [&](const std::string& text) {
        testutil::write_text(dir / "c.json", text);
        return run({"simulate", "--config", (dir / "c.json").string(), "--out", out}).code;
    };
    EXPECT_EQ(with_config(R"({"simulate": {"n": 5, "colour": "red"}})"), 2);
    EXPECT_EQ(with_config(R"({"simulate": {"n": "five"}})"), 2);
    EXPECT_EQ(with_config(R"({"speed": 3})"), 2);
    EXPECT_EQ(with_config(R"([1, 2])"), 2);
    EXPECT_EQ(with_config(R"({"simulate": 3})"), 2);
    EXPECT_EQ(with_config(R"({"train": 3})"), 2);
    EXPECT_EQ(with_config("{not json"), 2);
    EXPECT_FALSE(fs::exists(out));
    EXPECT_EQ(run({"simulate", "--config", (dir / "none.json").string(), "--out", out}).code, 2);
}

TEST(Cli, ConfigFileAndOverrides) {
    testutil::TempDir dir;
    const auto out = (dir / "a.csv").string();
    testutil::write_text(dir / "c.json", nlohmann::json{{"seed", 7}, {"simulate", {{"n", 12}, {"out", out}, {"noise", 0.0}}}}.dump());
    auto r = run({"simulate", "--config", (dir / "c.json").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto db = simdb::import_simulations(out);
    EXPECT_EQ(db.size(), 12u);
    EXPECT_EQ(db.meta.seed, 7u);
    EXPECT_EQ(db.meta.noise_sigma, 0.0);

    r = run({"simulate", "--config", (dir / "c.json").string(), "--n", "9", "--seed", "8"});
    ASSERT_EQ(r.code, 0) << r.err;
    db = simdb::import_simulations(out);
    EXPECT_EQ(db.size(), 9u);
    EXPECT_EQ(db.meta.seed, 8u);
}

TEST(Cli, PrintConfigRoundTrip) {
    testutil::TempDir dir;
    const auto first = run({"train", "--db", "x.csv", "--method", "krr", "--folds", "4", "--seed", "3", "--out", "m.bin", "--print-config"});
    ASSERT_EQ(first.code, 0) << first.err;
    const auto j = nlohmann::json::parse(first.out);
    EXPECT_EQ(j["seed"], 3);
    EXPECT_EQ(j["train"]["method"], "krr");
    EXPECT_EQ(j["train"]["folds"], 4);
    EXPECT_EQ(j["train"]["cost"], "sq-loglik");
    testutil::write_text(dir / "c.json", first.out);
    const auto second = run({"train", "--config", (dir / "c.json").string(), "--print-config"});
    ASSERT_EQ(second.code, 0) << second.err;
    EXPECT_EQ(nlohmann::json::parse(second.out), j);
    EXPECT_TRUE(listing(dir.path()).size() == 1u);
}

TEST(Cli, DataErrors) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "30", "--out", db}).code, 0);
    // Corrupt one target value.
    auto text = testutil::slurp(db);
    std::istringstream in(text);
    std::string line, rebuilt;
    int lineno = 0, header_line = -1;
    int fvc_col = -1;
    while (std::getline(in, line)) {
        if (fvc_col < 0 && line.rfind("red,", 0) == 0) {
            std::stringstream h(line);
            std::string c;
            for (int i = 0; std::getline(h, c, ','); ++i)
                if (c == "fvc") fvc_col = i;
            header_line = lineno;
        } else if (fvc_col >= 0 && lineno == header_line + 2) {
            std::stringstream cells(line);
            std::string c, out;
            for (int i = 0; std::getline(cells, c, ','); ++i) out += (i ? "," : "") + (i == fvc_col ? std::string("1.2") : c);
            line = out;
        }
        rebuilt += line + "\n";
        ++lineno;
    }
    ASSERT_GE(fvc_col, 0);
    testutil::write_text(dir / "bad.csv", rebuilt);
    const auto r = run(concat({"train", "--db", (dir / "bad.csv").string(), "--out", (dir / "m.bin").string()}, kQuickGpr));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(dir / "m.bin"));

    testutil::write_text(dir / "garbage.bin", "not a model");
    testutil::write_text(dir / "pts.csv", "red,nir,mir\n0.1,0.3,0.2\n");
    EXPECT_EQ(run({"predict", "--model", (dir / "garbage.bin").string(), "--input", (dir / "pts.csv").string()}).code, 3);
    testutil::write_text(dir / "nocol.csv", "red,nir\n0.1,0.3\n");
    EXPECT_EQ(run({"isolines", "--input", (dir / "nocol.csv").string(), "--out", (dir / "iso.csv").string()}).code, 3);
}

TEST(Cli, HelpForEveryCommand) {
    for (const char* cmd : {"simulate", "import-sims", "train", "predict", "build-lut", "retrieve", "evaluate", "sensitivity",
                            "robustness", "sample-size", "isolines"}) {
        const auto r = run({cmd, "--help"});
        EXPECT_EQ(r.code, 0) << cmd;
        EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
        EXPECT_NE(r.out.find("--seed"), std::string::npos) << cmd;
    }
    const auto top = run({"--help"});
    EXPECT_EQ(top.code, 0);
    EXPECT_NE(top.out.find("retrieve"), std::string::npos);
    EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, ImportSims) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), out = (dir / "again.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "25", "--out", db}).code, 0);
    const auto r = run({"import-sims", "--input", db, "--out", out});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(simdb::import_simulations(out).size(), 25u);
    EXPECT_EQ(run({"import-sims", "--out", out}).code, 2);
    EXPECT_EQ(run({"import-sims", "--input", db, "--manifest", db, "--out", out}).code, 2);
}

TEST(Cli, Isolines) {
    testutil::TempDir dir;
    const auto db = (dir / "db.csv").string(), iso = (dir / "iso.csv").string();
    ASSERT_EQ(run({"simulate", "--n", "300", "--out", db}).code, 0);
    const auto r = run({"isolines", "--input", db, "--step", "0.05", "--min-count", "2", "--out", iso});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(testutil::slurp(iso)), 1u + 8u * 12u);
    EXPECT_EQ(run({"isolines", "--input", db, "--step", "0", "--out", iso}).code, 2);
}

TEST(Cli, ExperimentCommands) {
    testutil::TempDir dir;
    const auto d = dir.path().string();
    auto r = run(concat({"evaluate", "--n", "150", "--methods", "gpr,krr", "--cv-subset", "100", "--folds", "3", "--out-dir", d},
                        kQuickGpr));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "assessment.csv"));
    EXPECT_TRUE(fs::exists(dir / "evaluate.manifest.json"));
    const auto summary = nlohmann::json::parse(testutil::slurp(dir / "assessment.json"));
    EXPECT_EQ(summary["n_train"], 120);

    r = run(concat({"robustness", "--n", "120", "--reps", "2", "--methods", "gpr", "--out-dir", d}, kQuickGpr));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(testutil::slurp(dir / "robustness_reps.csv")), 3u);

    r = run(concat({"sample-size", "--n", "200", "--test-size", "50", "--sizes", "40,80", "--out-dir", d}, kQuickGpr));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(testutil::slurp(dir / "sample_size.csv")), 3u);

    r = run(concat({"sensitivity", "--n", "100", "--levels", "0,0.01", "--err-levels", "0.03", "--n-per-sphere", "3", "--m", "10",
                    "--out-dir", d},
                   kQuickGpr));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(testutil::slurp(dir / "sensitivity.csv")), 1u + 2u * 4u);

    EXPECT_EQ(run({"robustness", "--reps", "1", "--out-dir", d}).code, 2);
    EXPECT_EQ(run({"evaluate", "--methods", "svm", "--out-dir", d}).code, 2);
    EXPECT_EQ(run({"sensitivity", "--levels", "0.02,0.01", "--out-dir", d}).code, 2);
}
