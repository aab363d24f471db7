#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace plngm;
using namespace plngm::io;

namespace {

std::string error_of(const std::string& text, Orientation o = Orientation::samples_as_rows) {
    std::istringstream in(text);
    try {
        read_counts(in, o, "counts.csv");
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(ReadCounts, TwoByTwoWithHeader) {
    std::istringstream in("sample,g1,g2\ns1,1,2\ns2,3,4\n");
    const auto m = read_counts(in, Orientation::samples_as_rows);
    EXPECT_EQ(m.variable_names, (std::vector<std::string>{"g1", "g2"}));
    EXPECT_EQ(m.sample_ids, (std::vector<std::string>{"s1", "s2"}));
    EXPECT_EQ(m.values(1, 0), 3);
    EXPECT_EQ(m.values(0, 1), 2);
}

TEST(ReadCounts, HeaderWithoutCornerCell) {
    std::istringstream in("g1,g2\ns1,1,2\ns2,3,4\n");
    const auto m = read_counts(in, Orientation::samples_as_rows);
    EXPECT_EQ(m.variable_names, (std::vector<std::string>{"g1", "g2"}));
    EXPECT_EQ(m.values(1, 1), 4);
}

TEST(ReadCounts, TabDelimitedAndVariablesAsRows) {
    std::istringstream in("gene\ts1\ts2\ts3\ng1\t1\t2\t3\ng2\t4\t5\t6\n");
    const auto m = read_counts(in, Orientation::variables_as_rows);
    EXPECT_EQ(m.n(), 3);
    EXPECT_EQ(m.p(), 2);
    EXPECT_EQ(m.values(2, 1), 6);
    EXPECT_EQ(m.variable_names[1], "g2");
    EXPECT_EQ(m.sample_ids[0], "s1");
}

TEST(ReadCounts, NegativeCellNamed) {
    const auto msg = error_of("sample,g1,g2\ns1,1,2\ns2,-3,4\n");
    EXPECT_NE(msg.find("negative"), std::string::npos) << msg;
    EXPECT_NE(msg.find("counts.csv:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'s2'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'g1'"), std::string::npos) << msg;
}

TEST(ReadCounts, NonIntegerRejected) {
    EXPECT_NE(error_of("sample,g1\ns1,1.5\ns2,2\n").find("not an integer"), std::string::npos);
    EXPECT_NE(error_of("sample,g1\ns1,abc\ns2,2\n").find("not an integer"), std::string::npos);
}

TEST(ReadCounts, RaggedAndDuplicateNames) {
    EXPECT_NE(error_of("sample,g1,g2\ns1,1,2\ns2,3\n").find("counts.csv:3"), std::string::npos);
    EXPECT_NE(error_of("sample,g1,g1\ns1,1,2\ns2,3,4\n").find("duplicate"), std::string::npos);
    EXPECT_NE(error_of("sample,g1\ns1,1\ns1,3\n").find("duplicate"), std::string::npos);
    EXPECT_FALSE(error_of("").empty());
}

TEST(ReadCounts, QuotedFields) {
    std::istringstream in("\"sample\",\"g,1\",g2\ns1,1,2\ns2,3,4\n");
    const auto m = read_counts(in, Orientation::samples_as_rows);
    EXPECT_EQ(m.variable_names[0], "g,1");
}

TEST(ReadCounts, RoundTripExact) {
    const auto m = test::synthetic_counts(30, 8, 2);
    std::ostringstream out;
    write_counts(out, m);
    std::istringstream in(out.str());
    const auto back = read_counts(in, Orientation::samples_as_rows);
    EXPECT_TRUE((back.values.array() == m.values.array()).all());
    EXPECT_EQ(back.variable_names, m.variable_names);
    EXPECT_EQ(back.sample_ids, m.sample_ids);
}

TEST(ReadCounts, MissingFileIsInputError) {
    EXPECT_THROW(read_counts(std::filesystem::path("/nonexistent/x.csv")), InputError);
}

TEST(Orientation, Parsing) {
    EXPECT_EQ(orientation_from_string(to_string(Orientation::variables_as_rows)), Orientation::variables_as_rows);
    EXPECT_THROW(orientation_from_string("diagonal"), ConfigError);
}

TEST(FormatDouble, ShortestRoundTrip) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0}) {
        EXPECT_EQ(std::stod(format_double(x)), x);
    }
}

TEST(MatrixFile, RoundTripBitExact) {
    std::mt19937_64 rng(3);
    const Matrix m = test::random_spd(4, rng);
    std::ostringstream out;
    write_matrix(out, m, {"a", "b", "c", "d"}, {"a", "b", "c", "d"}, "variable");
    std::istringstream in(out.str());
    const auto back = read_matrix(in);
    EXPECT_TRUE((back.values.array() == m.array()).all());
    EXPECT_EQ(back.row_names[2], "c");
}

TEST(EstimateJson, RoundTripAndReorder) {
    InitialEstimate e{(Vector(3) << 1.0, 2.0, 3.0).finished(), (Vector(3) << 0.1, 0.2, 0.3).finished(),
                      InitOrigin::moment, {0}};
    const auto j = estimate_json(e, {"a", "b", "c"});
    const auto same = estimate_from_json(j, {"a", "b", "c"});
    EXPECT_TRUE(same.beta0 == e.beta0);
    EXPECT_TRUE(same.sigma0_diag == e.sigma0_diag);
    const auto reordered = estimate_from_json(j, {"c", "a"});
    EXPECT_EQ(reordered.beta0[0], 3.0);
    EXPECT_EQ(reordered.sigma0_diag[1], 0.1);
    EXPECT_THROW(estimate_from_json(j, {"z"}), InputError);
}

TEST(TransformCheckpoint, RoundTripExact) {
    const auto data = test::synthetic_counts(25, 5, 8);
    TransformOptions opts;
    opts.large_count_threshold = 500;
    NamedTransform nt{transform_matrix(data, moment_init(data), opts), data.variable_names, data.sample_ids};
    const auto dir = test::temp_dir("ckpt");
    write_transformed(dir, "transformed", nt);
    const auto back = read_transformed(dir, "transformed");
    EXPECT_TRUE((back.transformed.values.array() == nt.transformed.values.array()).all());
    EXPECT_TRUE((back.transformed.variance.array() == nt.transformed.variance.array()).all());
    EXPECT_EQ(back.transformed.method_used, nt.transformed.method_used);
    EXPECT_TRUE(back.transformed.estimate.beta0 == nt.transformed.estimate.beta0);
    EXPECT_EQ(back.transformed.options.large_count_threshold, 500);
    EXPECT_EQ(back.variable_names, data.variable_names);
    std::filesystem::remove_all(dir);
}

TEST(EdgeList, SortedByMagnitudeThenIndex) {
    PrecisionEstimate est;
    est.omega = Matrix::Identity(4, 4);
    auto set = [&](int i, int k, double v) { est.omega(i, k) = est.omega(k, i) = v; };
    set(0, 1, 0.1);
    set(2, 3, -0.5);
    set(0, 3, 0.1);
    est.support = extract_support(est.omega);
    const auto edges = edges_by_weight(est);
    ASSERT_EQ(edges.size(), 3u);
    EXPECT_EQ(edges[0], Edge(2, 3));
    EXPECT_EQ(edges[1], Edge(0, 1));
    EXPECT_EQ(edges[2], Edge(0, 3));
    std::ostringstream out;
    write_edge_list(out, est, {"a", "b", "c", "d"});
    EXPECT_EQ(out.str(), "var_i\tvar_k\tomega_ik\nc\td\t-0.5\na\tb\t0.1\na\td\t0.1\n");
}

TEST(BenchCsv, Headers) {
    bench::BenchConfig cfg;
    cfg.p = 8;
    cfg.n = 30;
    cfg.replicates = 1;
    cfg.path_length = 4;
    cfg.methods = {bench::Method::log};
    const auto r = bench::run_benchmark(cfg);
    std::ostringstream tidy, summary;
    write_bench_tidy(tidy, r);
    write_bench_summary(summary, r);
    const auto t = tidy.str(), s = summary.str();
    EXPECT_EQ(t.substr(0, t.find('\n')), "replicate,network,method,lambda_index,fpr,tpr");
    EXPECT_EQ(s.substr(0, s.find('\n')), "network,method,mean_auc,sd_auc");
    // One tidy row per lambda.
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 4);
    EXPECT_NE(s.find("hub,LOG,"), std::string::npos);
}
