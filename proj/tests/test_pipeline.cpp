#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace plngm;
namespace fs = std::filesystem;

namespace {

struct FitFixture : ::testing::Test {
    fs::path dir;
    fs::path input;

    void SetUp() override {
        dir = test::temp_dir("fit");
        input = dir / "counts.csv";
        io::write_counts(input, test::synthetic_counts(60, 12, 31));
    }
    void TearDown() override { fs::remove_all(dir); }

    PipelineConfig config(const std::string& out) const {
        PipelineConfig cfg;
        cfg.input = input;
        cfg.output_dir = dir / out;
        cfg.preprocess.min_variance_quantile = 0.0;
        cfg.path_length = 12;
        cfg.record_timings = false;
        cfg.threads = 2;
        return cfg;
    }
};

CountMatrix from_rows(std::initializer_list<std::initializer_list<std::int64_t>> rows) {
    CountArray v(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index j = 0;
    for (const auto& r : rows) {
        Eigen::Index i = 0;
        for (auto x : r) v(j, i++) = x;
        ++j;
    }
    return CountMatrix::from_values(v);
}

} // namespace

TEST(Preprocess, ZeroQuantileDropsNothing) {
    const auto data = test::synthetic_counts(20, 7, 1);
    PreprocessConfig cfg{0.0, false};
    const auto r = preprocess(data, cfg);
    EXPECT_TRUE(r.dropped.empty());
    EXPECT_TRUE((r.counts.values.array() == data.values.array()).all());
    EXPECT_EQ(r.manifest()["size_factor_method"], "none");
}

TEST(Preprocess, QuantileDropsLowVariance) {
    const auto data = from_rows({{1, 10, 100, 5}, {2, 20, 300, 5}, {1, 40, 50, 6}});
    const auto r = preprocess(data, {0.5, false});
    EXPECT_EQ(r.dropped, (std::vector<std::string>{"V1", "V4"}));
    EXPECT_EQ(r.counts.variable_names, (std::vector<std::string>{"V2", "V3"}));
}

TEST(Preprocess, IdenticalRowsHaveUnitSizeFactors) {
    const auto data = from_rows({{3, 8, 1}, {3, 8, 1}, {3, 8, 1}});
    const auto r = preprocess(data, {0.0, true});
    EXPECT_TRUE(r.size_factors.isApprox(Vector::Ones(3)));
    EXPECT_TRUE((r.counts.values.array() == data.values.array()).all());
    EXPECT_FALSE(r.size_factor_fallback);
}

TEST(Preprocess, DoubledRowHasSizeFactorTwo) {
    const auto data = from_rows({{10, 40, 7, 90}, {12, 35, 9, 100}, {20, 80, 14, 180}});
    // Median-of-ratios oracle computed directly.
    Vector geo(4);
    for (int i = 0; i < 4; ++i) {
        geo[i] = std::exp((std::log(double(data.values(0, i))) + std::log(double(data.values(1, i))) +
                           std::log(double(data.values(2, i)))) / 3.0);
    }
    auto sf = [&](int j) {
        std::vector<double> r;
        for (int i = 0; i < 4; ++i) r.push_back(data.values(j, i) / geo[i]);
        std::sort(r.begin(), r.end());
        return 0.5 * (r[1] + r[2]);
    };
    const auto res = preprocess(data, {0.0, true});
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(res.size_factors[j], sf(j), 1e-12);
    EXPECT_NEAR(res.size_factors[2] / res.size_factors[0], 2.0, 1e-12);
    EXPECT_TRUE(res.adjusted.row(2).isApprox(res.adjusted.row(0)));
}

TEST(Preprocess, FallbackWhenNoAllPositiveVariable) {
    const auto data = from_rows({{0, 4, 6}, {3, 0, 2}, {5, 1, 0}});
    const auto r = preprocess(data, {0.0, true});
    EXPECT_TRUE(r.size_factor_fallback);
    EXPECT_EQ(r.manifest()["size_factor_method"], "total_count");
    EXPECT_NEAR(r.size_factors.array().log().sum(), 0.0, 1e-12);
}

TEST(Preprocess, RejectsBadQuantile) {
    const auto data = test::synthetic_counts(10, 3, 1);
    EXPECT_THROW(preprocess(data, {1.0, false}), ConfigError);
}

TEST(Report, DegreesAndTopK) {
    Matrix omega = Matrix::Identity(4, 4);
    auto set = [&](int i, int k) { omega(i, k) = omega(k, i) = 0.2; };
    set(0, 1);
    set(0, 2);
    set(2, 3);
    const auto r = report_from_precision(omega, {"d", "c", "b", "a"}, 3);
    EXPECT_EQ(r.degrees, (std::vector<Eigen::Index>{2, 1, 2, 1}));
    ASSERT_EQ(r.top.size(), 3u);
    EXPECT_EQ(r.top[0].name, "b");
    EXPECT_EQ(r.top[1].name, "d");
    EXPECT_EQ(r.top[2].name, "a");
    const auto j = report_json(r);
    EXPECT_EQ(j["edge_count"], 3);
    EXPECT_THROW(report_from_precision(omega, {"x"}, 3), InputError);
}

TEST(ConfigValidation, Ranges) {
    PipelineConfig cfg;
    cfg.input = "x.csv";
    EXPECT_NO_THROW(cfg.validate());
    cfg.gamma = 1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.gamma = 0.5;
    cfg.path_ratio = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.path_ratio = 0.01;
    cfg.input.clear();
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST_F(FitFixture, WritesArtifactsAndConsistentReport) {
    const auto out = run_fit_detailed(config("a"));
    for (const char* f : {"preprocessed_counts.csv", "depth_adjusted.csv", "preprocess.json", "initial_estimate.json",
                          "transformed.csv", "transformed_variance.csv", "transformed.json", "covariance.csv",
                          "path.csv", "precision.csv", "selected.json", "edges.tsv", "network_report.json",
                          "run_manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / "a" / f)) << f;
    }
    Eigen::Index total = 0;
    for (auto d : out.report.degrees) total += d;
    EXPECT_EQ(total, static_cast<Eigen::Index>(2 * out.report.edge_count()));
    EXPECT_EQ(out.report.variable_names.size(), 12u);
    EXPECT_EQ(out.path.estimates.size(), 12u);
    const auto manifest = io::read_json(dir / "a" / "run_manifest.json");
    EXPECT_FALSE(manifest.contains("timings"));
    EXPECT_EQ(manifest["resumed_from"], "start");
}

TEST_F(FitFixture, DeterministicBytes) {
    run_fit(config("a"));
    run_fit(config("b"));
    for (const auto& entry : fs::directory_iterator(dir / "a")) {
        const auto name = entry.path().filename();
        if (name == "run_manifest.json" || name == "network_report.json") continue;
        EXPECT_EQ(io::read_text(entry.path()), io::read_text(dir / "b" / name)) << name;
    }
}

TEST_F(FitFixture, HugeLambdaGivesEmptyNetwork) {
    auto cfg = config("big");
    cfg.lambda = 1e12;
    const auto r = run_fit(cfg);
    EXPECT_EQ(r.edge_count(), 0u);
    for (auto d : r.degrees) EXPECT_EQ(d, 0);
    EXPECT_EQ(io::read_text(dir / "big" / "edges.tsv"), "var_i\tvar_k\tomega_ik\n");
}

TEST_F(FitFixture, MirnaFixedAndEmpiricalBayes) {
    auto cfg = config("mirna");
    cfg.initializer = Initializer::mirna;
    cfg.gamma = 0.5;
    EXPECT_NO_THROW(run_fit(cfg));
    const auto j = io::read_json(dir / "mirna" / "initial_estimate.json");
    ASSERT_TRUE(j.contains("gamma"));
    for (const auto& g : j["gamma"]) EXPECT_EQ(g.get<double>(), 0.5);

    cfg.output_dir = dir / "eb";
    cfg.gamma_mode = GammaMode::empirical_bayes;
    cfg.bootstrap_reps = 50;
    EXPECT_NO_THROW(run_fit(cfg));
}

TEST_F(FitFixture, ResumeFromCheckpointsMatches) {
    run_fit(config("full"));
    auto from_transform = config("resumed");
    from_transform.transform_checkpoint = dir / "full";
    run_fit(from_transform);
    auto from_estimate = config("resumed_init");
    from_estimate.estimate_checkpoint = dir / "full" / "initial_estimate.json";
    run_fit(from_estimate);
    for (const char* f : {"covariance.csv", "path.csv", "precision.csv", "selected.json", "edges.tsv"}) {
        EXPECT_EQ(io::read_text(dir / "full" / f), io::read_text(dir / "resumed" / f)) << f;
        EXPECT_EQ(io::read_text(dir / "full" / f), io::read_text(dir / "resumed_init" / f)) << f;
    }
    EXPECT_EQ(io::read_text(dir / "full" / "transformed.csv"), io::read_text(dir / "resumed_init" / "transformed.csv"));
    EXPECT_EQ(io::read_json(dir / "resumed" / "run_manifest.json")["resumed_from"], "transform");
}

TEST_F(FitFixture, ErrorsCarryStageLabel) {
    auto cfg = config("missing");
    cfg.input = dir / "nope.csv";
    try {
        run_fit(cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
        EXPECT_NE(std::string(e.what()).find("stage 'ingest'"), std::string::npos) << e.what();
    }
    cfg = config("bad");
    cfg.path_length = 1;
    try {
        run_fit(cfg);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(Bench, WritesCsvFiles) {
    const auto dir = test::temp_dir("bench");
    bench::BenchConfig cfg;
    cfg.p = 10;
    cfg.n = 40;
    cfg.replicates = 2;
    cfg.path_length = 5;
    cfg.methods = {bench::Method::orig, bench::Method::log};
    run_bench(cfg, dir, false);
    EXPECT_TRUE(fs::exists(dir / "bench_tidy.csv"));
    EXPECT_TRUE(fs::exists(dir / "bench_summary.csv"));
    EXPECT_FALSE(io::read_json(dir / "bench_manifest.json").contains("timings"));
    fs::remove_all(dir);
}
