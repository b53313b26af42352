#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

namespace {

namespace fs = std::filesystem;

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("hvs-cli-") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        hvs::cli::write_file(dir_ / name, content);
        return path(name);
    }

    static CliRun run(const std::vector<std::string>& args) {
        std::ostringstream out;
        std::ostringstream err;
        const int code = hvs::cli::dispatch(args, out, err);
        return {code, out.str(), err.str()};
    }

    std::string three_unit() const { return write("d.csv", "unit_id,pi\na,0.5\nb,0.7\nc,0.8\n"); }

    fs::path dir_;
};

TEST_F(Cli, SampleWritesOneRowPerSelectedUnit) {
    const auto r = run({"sample", "--pi", three_unit(), "--seed", "7", "--out", path("s.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = hvs::cli::read_csv(path("s.csv"));
    EXPECT_EQ(t.header, (std::vector<std::string>{"unit_id", "pi", "pi0", "in_sample"}));
    EXPECT_EQ(t.rows.size(), 2u);
    const auto m = nlohmann::json::parse(hvs::cli::read_file(path("s.csv.manifest.json")));
    EXPECT_EQ(m["subcommand"], "sample");
    EXPECT_EQ(m["seeds"]["seed"], 7);
    EXPECT_EQ(m["outputs"][0]["sha256"], hvs::cli::file_digest(path("s.csv")));
    EXPECT_EQ(m["inputs"][0]["sha256"], hvs::cli::file_digest(path("d.csv")));
}

TEST_F(Cli, AllRowsFlagMarksMembership) {
    const auto r = run({"sample", "--pi", three_unit(), "--seed", "7", "--all", "--out", path("s.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = hvs::cli::read_csv(path("s.csv"));
    ASSERT_EQ(t.rows.size(), 3u);
    int in = 0;
    for (const auto& row : t.rows) in += row[3] == "1";
    EXPECT_EQ(in, 2);
}

TEST_F(Cli, NonProbabilityNamesTheUnit) {
    const auto bad = write("bad.csv", "unit_id,pi\na,0.5\nb,0.5\nc,1.0\n");
    const auto r = run({"sample", "--pi", bad, "--seed", "7", "--out", path("s.csv")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("NonProbability: unit 3"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("s.csv")));
}

TEST_F(Cli, MalformedCsvIsValidationError) {
    const auto bad = write("bad.csv", "unit_id,pi\na,0.5\nb,zero\n");
    const auto r = run({"probs", "--pi", bad, "--out", path("p.csv")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run({"sample", "--pi", three_unit(), "--out", path("s.csv")}).code, 2);  // no seed
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"sample", "--pi", three_unit(), "--seed", "1", "--variant", "other", "--out", path("s")}).code, 2);
    EXPECT_EQ(run({"probs", "--pi", three_unit(), "--joint", "conditional", "--out", path("p.csv")}).code, 2);
    EXPECT_EQ(run({"diagnostics", "--recipe", "gamma", "--out", path("g.csv")}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(Cli, ConditionalJointMatrix) {
    const auto r = run({"probs", "--pi", three_unit(), "--joint", "conditional", "--nprime", "2", "--out",
                        path("j.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = hvs::cli::read_csv(path("j.csv"));
    ASSERT_EQ(t.rows.size(), 9u);
    std::map<std::pair<std::string, std::string>, double> v;
    for (std::size_t i = 0; i < t.rows.size(); ++i) v[{t.rows[i][0], t.rows[i][1]}] = t.number(i, 2);
    EXPECT_NEAR((v[{"a", "b"}]), 5.0 / 19, 1e-15);
    EXPECT_NEAR((v[{"a", "c"}]), 5.0 / 19, 1e-15);
    EXPECT_NEAR((v[{"b", "c"}]), 9.0 / 19, 1e-15);
    for (const auto& [key, value] : v) EXPECT_EQ(value, (v[{key.second, key.first}]));
}

TEST_F(Cli, UnconditionalMatrixWarnsOverBudget) {
    const auto r = run({"probs", "--pi", three_unit(), "--joint", "unconditional", "--budget", "10", "--out",
                        path("u.csv")});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    const auto quiet = run({"probs", "--pi", three_unit(), "--joint", "unconditional", "--out", path("u.csv")});
    EXPECT_TRUE(quiet.err.empty());
}

TEST_F(Cli, FirstOrderWithSplitAndDeltas) {
    const auto r = run({"probs", "--pi", three_unit(), "--nprime", "1", "--deltas", path("dl.csv"), "--out",
                        path("p.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = hvs::cli::read_csv(path("p.csv"));
    EXPECT_EQ(t.header.back(), "pi0");
    const auto dl = hvs::cli::read_csv(path("dl.csv"));
    ASSERT_EQ(dl.rows.size(), 2u);
    EXPECT_NEAR(dl.number(0, 1) + dl.number(1, 1), 1.0, 1e-15);
    EXPECT_EQ(run({"probs", "--pi", three_unit(), "--nprime", "3", "--out", path("p.csv")}).code, 1);
}

TEST_F(Cli, EstimateMatchesLibrary) {
    const auto pop = hvs::generate_population(hvs::PopulationConfig::gamma_recipe(300, 5));
    std::string csv = "unit_id,x,y2\n";
    for (std::size_t k = 0; k < pop.size(); ++k) {
        csv += "u" + std::to_string(k) + "," + hvs::cli::fmt(pop.x[k]) + "," + hvs::cli::fmt(pop.y[1][k]) + "\n";
    }
    const auto design_csv = write("pop.csv", csv);
    ASSERT_EQ(run({"sample", "--pi", design_csv, "--pps", "60", "--seed", "11", "--out", path("s.csv")}).code, 0);
    const auto r = run({"estimate", "--pi", design_csv, "--pps", "60", "--sample", path("s.csv"), "--y", design_csv,
                        "--column", "y2", "--variance", "--seed", "11", "--out", path("e.json")});
    ASSERT_EQ(r.code, 0) << r.err;

    const auto design = hvs::pps_probabilities(pop.x, 60);
    hvs::RngStream rng(11, 0);
    const auto sel = hvs::hv_sample(design, rng, hvs::Variant::Sequential);
    const auto e = nlohmann::json::parse(hvs::cli::read_file(path("e.json")));
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0]["estimator"], "HT");
    EXPECT_EQ(e[0]["total"].get<double>(), hvs::ht_total(sel, pop.y[1], design).total);
    EXPECT_TRUE(e[0]["variance_estimate"].is_null());
    const auto cht = hvs::cht_total(sel, pop.y[1], design, true);
    EXPECT_EQ(e[1]["total"].get<double>(), cht.total);
    EXPECT_EQ(e[1]["n_prime"].get<int>(), sel.split.n_prime);
    if (cht.variance_estimate) {
        EXPECT_EQ(e[1]["variance_estimate"].get<double>(), *cht.variance_estimate);
    }
    EXPECT_EQ(e[1]["seed"], 11);
}

TEST_F(Cli, EstimateRecoversForcedUnits) {
    // Phase 1 with n' < n leaves forced units with pi0 = 1.
    const auto d = write("d.csv", "unit_id,pi\na,0.3\nb,0.5\nc,0.6\nd,0.7\ne,0.9\n");
    const auto y = write("y.csv", "unit_id,y\na,1\nb,2\nc,3\nd,4\ne,5\n");
    bool saw_forced = false;
    for (int seed = 1; seed <= 40; ++seed) {
        ASSERT_EQ(run({"sample", "--pi", d, "--seed", std::to_string(seed), "--out", path("s.csv")}).code, 0);
        const auto r = run({"estimate", "--pi", d, "--sample", path("s.csv"), "--y", y, "--out", path("e.json")});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto m = nlohmann::json::parse(hvs::cli::read_file(path("s.csv.manifest.json")));
        const auto e = nlohmann::json::parse(hvs::cli::read_file(path("e.json")));
        EXPECT_EQ(e[0]["n_prime"], m["details"]["n_prime"]);
        saw_forced = saw_forced || e[0]["n_prime"].get<int>() < 3;
    }
    EXPECT_TRUE(saw_forced);
}

TEST_F(Cli, EstimateRejectsForeignSample) {
    const auto y = write("y.csv", "unit_id,y\na,1\nb,2\nc,3\n");
    const auto tampered = write("s.csv", "unit_id,pi,pi0,in_sample\na,0.5,0.5,1\nc,0.8,0.75,1\n");
    EXPECT_EQ(run({"estimate", "--pi", three_unit(), "--sample", tampered, "--y", y, "--out", path("e.json")}).code, 1);
    const auto short_sample = write("s1.csv", "unit_id,pi,pi0,in_sample\na,0.5,0.52631578947368418,1\n");
    EXPECT_EQ(run({"estimate", "--pi", three_unit(), "--sample", short_sample, "--y", y, "--out", path("e.json")}).code,
              1);
}

TEST_F(Cli, EnumerateThreeUnitReport) {
    const auto r = run({"enumerate", "--pi", three_unit(), "--out", path("en.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rep = nlohmann::json::parse(hvs::cli::read_file(path("en.csv.report.json")));
    EXPECT_LT(rep["tv_between_variants"].get<double>(), 1e-12);
    EXPECT_LT(rep["max_marginal_error"].get<double>(), 1e-12);
    const auto t = hvs::cli::read_csv(path("en.csv"));
    ASSERT_EQ(t.rows.size(), 3u);
    EXPECT_EQ(t.rows[0][0], "a;b");
    EXPECT_NEAR(t.number(0, 1), 0.2, 1e-15);
}

TEST_F(Cli, EnumerateEqualProbabilities) {
    const auto d = write("eq.csv", "unit_id,pi\n1,0.5\n2,0.5\n3,0.5\n4,0.5\n");
    ASSERT_EQ(run({"enumerate", "--pi", d, "--variant", "draw-by-draw", "--out", path("en.csv")}).code, 0);
    const auto t = hvs::cli::read_csv(path("en.csv"));
    ASSERT_EQ(t.rows.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(t.number(i, 1), 1.0 / 6, 1e-15);
}

TEST_F(Cli, EnumerateRefusesLargeDesigns) {
    std::string csv = "unit_id,pi\n";
    for (int k = 0; k < 13; ++k) csv += std::to_string(k) + (k < 9 ? ",0.5\n" : ",0.125\n");
    const auto d = write("big.csv", csv);
    const auto r = run({"enumerate", "--pi", d, "--out", path("en.csv")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("TooLarge"), std::string::npos) << r.err;
    ::setenv("HV_MAX_ENUM_N", "13", 1);
    const auto raised = run({"enumerate", "--pi", d, "--out", path("en.csv")});
    ::unsetenv("HV_MAX_ENUM_N");
    EXPECT_EQ(raised.code, 0) << raised.err;
}

TEST_F(Cli, DiagnosticsSingleDesign) {
    ASSERT_EQ(run({"diagnostics", "--pi", three_unit(), "--out", path("dg.csv")}).code, 0);
    const auto t = hvs::cli::read_csv(path("dg.csv"));
    EXPECT_EQ(t.header, (std::vector<std::string>{"n", "d1", "d2", "d3", "min_scaled_pi", "max_scaled_pi"}));
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_NEAR(t.number(0, 1), 0.05, 1e-15);
    const auto small = write("one.csv", "unit_id,pi\na,0.2\nb,0.8\n");
    EXPECT_EQ(run({"diagnostics", "--pi", small, "--out", path("dg.csv")}).code, 1);
}

TEST_F(Cli, GenerateManifestCarriesCoefficients) {
    ASSERT_EQ(run({"generate", "--recipe", "lognormal", "--size", "500", "--seed", "3", "--out", path("p.csv")}).code,
              0);
    const auto t = hvs::cli::read_csv(path("p.csv"));
    EXPECT_EQ(t.rows.size(), 500u);
    const auto m = nlohmann::json::parse(hvs::cli::read_file(path("p.csv.manifest.json")));
    const auto pop = hvs::generate_population(hvs::PopulationConfig::lognormal_recipe(500, 3));
    EXPECT_EQ(m["details"]["coefficients"]["bump"]["a1"].get<double>(), pop.coefficients[3].a1);
    EXPECT_EQ(m["details"]["config"]["size_distribution"], "lognormal");
    EXPECT_EQ(t.number(0, 1), pop.x[0]);
}

TEST_F(Cli, SimulateIgnoresThreadCount) {
    const std::vector<std::string> base{"simulate", "--recipe", "gamma", "--grid", "50,100", "--replicates", "300",
                                        "--seed", "9"};
    auto a = base;
    a.insert(a.end(), {"--threads", "1", "--out", path("a.csv")});
    auto b = base;
    b.insert(b.end(), {"--threads", "3", "--out", path("b.csv")});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    EXPECT_EQ(hvs::cli::read_file(path("a.csv")), hvs::cli::read_file(path("b.csv")));
    EXPECT_EQ(hvs::cli::read_csv(path("a.csv")).rows.size(), 16u);
}

TEST_F(Cli, ReplayReproducesOutputs) {
    ASSERT_EQ(run({"sample", "--pi", three_unit(), "--seed", "5", "--variant", "draw-by-draw", "--out",
                   path("s.csv")}).code,
              0);
    ASSERT_EQ(run({"enumerate", "--pi", three_unit(), "--out", path("en.csv")}).code, 0);
    for (const char* m : {"s.csv.manifest.json", "en.csv.manifest.json"}) {
        const auto r = run({"replay", "--manifest", path(m)});
        EXPECT_EQ(r.code, 0) << r.err;
        EXPECT_EQ(r.out.find("DIFFERS"), std::string::npos);
        EXPECT_NE(r.out.find("identical"), std::string::npos);
    }
}

TEST_F(Cli, ReplayRefusesChangedInputs) {
    const auto d = three_unit();
    ASSERT_EQ(run({"sample", "--pi", d, "--seed", "5", "--out", path("s.csv")}).code, 0);
    write("d.csv", "unit_id,pi\na,0.6\nb,0.6\nc,0.8\n");
    const auto r = run({"replay", "--manifest", path("s.csv.manifest.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("changed"), std::string::npos);
}

TEST_F(Cli, ReplayDetectsNondeterministicOutput) {
    ASSERT_EQ(run({"sample", "--pi", three_unit(), "--seed", "5", "--out", path("s.csv")}).code, 0);
    auto m = nlohmann::json::parse(hvs::cli::read_file(path("s.csv.manifest.json")));
    m["outputs"][0]["sha256"] = std::string(64, '0');
    hvs::cli::write_file(path("s.csv.manifest.json"), m.dump());
    const auto r = run({"replay", "--manifest", path("s.csv.manifest.json")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("DIFFERS"), std::string::npos);
}

TEST(CliFormat, RoundTripsDoubles) {
    for (double v : {0.1, 1.0 / 3, 5.0 / 19, 1e-300, 123456789.123456789}) {
        EXPECT_EQ(std::stod(hvs::cli::fmt(v)), v);
    }
}

TEST(CliGrid, Parses) {
    EXPECT_EQ(hvs::cli::parse_grid("400:2000:400"), (std::vector<int>{400, 800, 1200, 1600, 2000}));
    EXPECT_EQ(hvs::cli::parse_grid("5,7"), (std::vector<int>{5, 7}));
    EXPECT_THROW(hvs::cli::parse_grid("5:1:1"), hvs::cli::UsageError);
}

}  // namespace
