#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace plngm;

namespace {

Matrix diag_start(const CovarianceInput& in) { return in.s.diagonal().cwiseInverse().asDiagonal(); }

// Golden-section maximizer of a unimodal f on [a, b].
template <class F>
double golden_max(F f, double a, double b) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    for (int k = 0; k < 300; ++k) {
        if (f(c) > f(d)) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    return 0.5 * (a + b);
}

} // namespace

TEST(CovarianceInput, Validation) {
    CovarianceInput asym{(Matrix(2, 2) << 1, 0.5, 0.4, 1).finished(), 10};
    EXPECT_THROW(asym.validate(), InputError);
    CovarianceInput indef{(Matrix(2, 2) << 1, 2, 2, 1).finished(), 10};
    EXPECT_THROW(indef.validate(), InputError);
    EXPECT_THROW(glasso_fit(indef, 0.1), InputError);
    CovarianceInput ok{Matrix::Identity(3, 3), 10};
    EXPECT_NO_THROW(ok.validate());
}

TEST(SurrogateObjective, HandValues) {
    CovarianceInput id{Matrix::Identity(3, 3), 5};
    EXPECT_NEAR(surrogate_objective(Matrix::Identity(3, 3), id, 7.0), -3.0, 1e-15);
    CovarianceInput id2{Matrix::Identity(2, 2), 5};
    EXPECT_NEAR(surrogate_objective(2.0 * Matrix::Identity(2, 2), id2, 1.0), 2.0 * std::log(2.0) - 4.0, 1e-14);
    EXPECT_THROW(surrogate_objective(-Matrix::Identity(2, 2), id2, 1.0), InputError);
}

TEST(GlassoFit, LambdaAboveMaxGivesDiagonal) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        const auto in = test::random_covariance(6, 40, rng);
        const double lmax = max_off_diagonal(in.s);
        for (double lambda : {lmax, 2.0 * lmax}) {
            const auto est = glasso_fit(in, lambda);
            EXPECT_TRUE(est.support.empty());
            for (Eigen::Index i = 0; i < 6; ++i) {
                for (Eigen::Index k = 0; k < 6; ++k) {
                    if (i != k) {
                        EXPECT_EQ(est.omega(i, k), 0.0);
                    }
                }
                EXPECT_NEAR(est.omega(i, i), 1.0 / in.s(i, i), 1e-12);
            }
        }
    }
}

TEST(GlassoFit, LambdaZeroIsInverse) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        const auto in = test::random_covariance(8, 100, rng);
        const auto est = glasso_fit(in, 0.0);
        EXPECT_LT((est.omega - in.s.inverse()).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(GlassoFit, LambdaZeroScaling) {
    std::mt19937_64 rng(3);
    const auto in = test::random_covariance(5, 60, rng);
    for (double c : {0.1, 3.0, 250.0}) {
        const CovarianceInput scaled{c * in.s, in.n};
        const Matrix a = glasso_fit(scaled, 0.0).omega;
        const Matrix b = glasso_fit(in, 0.0).omega / c;
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9 * b.cwiseAbs().maxCoeff());
    }
}

TEST(GlassoFit, TwoVariableClosedForm) {
    const CovarianceInput in{(Matrix(2, 2) << 1.0, 0.5, 0.5, 1.0).finished(), 100};
    const double lambda = 0.2;
    // Profile the objective in b = omega_12: for fixed b the optimal diagonal
    // a solves a^2 - a - b^2 = 0 (symmetric problem).
    auto profile = [&](double b) {
        const double a = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * b * b));
        return std::log(a * a - b * b) - 2.0 * a - 2.0 * 0.5 * b - 2.0 * lambda * std::abs(b);
    };
    const double b_star = golden_max(profile, -2.0, 2.0);
    const auto est = glasso_fit(in, lambda);
    EXPECT_NEAR(est.omega(0, 1), b_star, 1e-6);
    // Effective covariance is soft-thresholded: 0.5 - 0.2.
    EXPECT_NEAR(est.covariance(0, 1), 0.3, 1e-6);
    EXPECT_NEAR(est.omega(0, 1), -0.3 / 0.91, 1e-6);
}

TEST(GlassoFit, KktCertificateAndSymmetry) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index p = 3 + t % 12;
        const auto in = test::random_covariance(p, 2 * p + 10, rng);
        const double lambda = max_off_diagonal(in.s) * (0.05 + 0.04 * t);
        const auto est = glasso_fit(in, lambda);
        EXPECT_LE(kkt_residual(est.omega, in, lambda), 1e-6);
        EXPECT_LT((est.omega - est.omega.transpose()).cwiseAbs().maxCoeff(), 1e-10);
        Eigen::LLT<Matrix> llt(est.omega);
        EXPECT_EQ(llt.info(), Eigen::Success);
        EXPECT_EQ(est.support, extract_support(est.omega));
    }
}

TEST(GlassoFit, ImprovesOnDiagonalStart) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index p = 2 + t % 15;
        const auto in = test::random_covariance(p, 3 * p + 5, rng);
        const double lambda = max_off_diagonal(in.s) * std::uniform_real_distribution<double>(0.01, 1.2)(rng);
        const auto est = glasso_fit(in, lambda);
        EXPECT_GE(surrogate_objective(est.omega, in, lambda), surrogate_objective(diag_start(in), in, lambda) - 1e-12);
        EXPECT_NEAR(est.objective, surrogate_objective(est.omega, in, lambda), 1e-9 * std::max(1.0, std::abs(est.objective)));
    }
}

TEST(GlassoFit, DualMonotoneAcrossSweeps) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const auto in = test::random_covariance(12, 30, rng);
        GlassoOptions opts;
        opts.record_trace = true;
        const auto est = glasso_fit(in, 0.1 * max_off_diagonal(in.s), nullptr, opts);
        ASSERT_FALSE(est.dual_trace.empty());
        // Inner lasso solves stop at 1e-3 * tol, so allow noise well below tol.
        for (std::size_t k = 1; k < est.dual_trace.size(); ++k) {
            EXPECT_GE(est.dual_trace[k], est.dual_trace[k - 1] - 1e-2 * opts.tol);
        }
        EXPECT_GE(est.dual_gap, -1e-8);
        EXPECT_LE(est.dual_gap, 1e-4);
    }
}

TEST(GlassoFit, PermutationEquivariance) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index p = 7;
        const auto in = test::random_covariance(p, 25, rng);
        std::vector<int> perm(p);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Eigen::PermutationMatrix<Eigen::Dynamic> pm(p);
        for (Eigen::Index i = 0; i < p; ++i) pm.indices()[i] = perm[static_cast<std::size_t>(i)];
        const CovarianceInput permuted{pm * in.s * pm.transpose(), in.n};
        const double lambda = 0.2 * max_off_diagonal(in.s);
        const Matrix a = glasso_fit(permuted, lambda).omega;
        const Matrix b = pm * glasso_fit(in, lambda).omega * pm.transpose();
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-5);
    }
}

TEST(GlassoFit, NonConvergenceCarriesLastIterate) {
    std::mt19937_64 rng(8);
    const auto in = test::random_covariance(10, 15, rng);
    GlassoOptions opts;
    opts.max_sweeps = 1;
    opts.tol = 1e-14;
    try {
        glasso_fit(in, 0.05 * max_off_diagonal(in.s), nullptr, opts);
        FAIL() << "expected GlassoError";
    } catch (const GlassoError& e) {
        EXPECT_EQ(e.last_iterate.omega.rows(), 10);
        EXPECT_GT(e.last_change, 0.0);
    }
}

TEST(LambdaGrid, GeometricAndDegenerate) {
    CovarianceInput in{(Matrix(2, 2) << 2.0, 1.0, 1.0, 2.0).finished(), 10};
    const auto g = lambda_grid(in, 3, 0.01);
    ASSERT_EQ(g.lambdas.size(), 3u);
    EXPECT_DOUBLE_EQ(g.lambdas[0], 1.0);
    EXPECT_NEAR(g.lambdas[1], 0.1, 1e-15);
    EXPECT_NEAR(g.lambdas[2], 0.01, 1e-15);
    EXPECT_FALSE(g.degenerate);
    EXPECT_TRUE(glasso_fit(in, g.lambdas.front()).support.empty());

    CovarianceInput id{Matrix::Identity(4, 4), 10};
    const auto d = lambda_grid(id, 10, 0.1);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.lambdas.size(), 1u);
    EXPECT_THROW(lambda_grid(in, 1, 0.1), InputError);
}

TEST(FitPath, SingleLambdaEqualsFit) {
    std::mt19937_64 rng(9);
    const auto in = test::random_covariance(6, 30, rng);
    const double lambda = 0.3 * max_off_diagonal(in.s);
    const auto path = fit_path(in, {lambda});
    const auto fit = glasso_fit(in, lambda);
    ASSERT_EQ(path.estimates.size(), 1u);
    EXPECT_TRUE((path.estimates[0].omega.array() == fit.omega.array()).all());
}

TEST(FitPath, IdentityGivesDiagonalEstimates) {
    CovarianceInput id{Matrix::Identity(5, 5), 10};
    const auto path = fit_path(id, {1.0, 0.5, 0.1, 0.01});
    for (const auto& e : path.estimates) EXPECT_TRUE(e.support.empty());
}

TEST(FitPath, WarmMatchesColdAndSupportGrows) {
    std::mt19937_64 rng(10);
    int monotone = 0, pairs = 0;
    for (int t = 0; t < 5; ++t) {
        const auto in = test::random_covariance(15, 40, rng);
        const auto grid = lambda_grid(in, 20, 0.05);
        const auto path = fit_path(in, grid.lambdas);
        ASSERT_TRUE(path.failures.empty());
        for (std::size_t k = 0; k < path.estimates.size(); ++k) {
            const auto cold = glasso_fit(in, path.lambdas[k]);
            EXPECT_NEAR(path.estimates[k].objective, cold.objective, 10.0 * kDefaultGlassoTol);
            if (k > 0) {
                ++pairs;
                if (path.estimates[k].edge_count() >= path.estimates[k - 1].edge_count()) ++monotone;
            }
        }
    }
    EXPECT_GE(static_cast<double>(monotone), 0.95 * pairs);
}

TEST(FitPath, RejectsNonDecreasing) {
    CovarianceInput id{Matrix::Identity(2, 2), 10};
    EXPECT_THROW(fit_path(id, {0.1, 0.2}), InputError);
    EXPECT_THROW(fit_path(id, {}), InputError);
}

TEST(Ebic, GammaZeroIsBic) {
    std::mt19937_64 rng(11);
    const auto in = test::random_covariance(6, 50, rng);
    auto path = fit_path(in, lambda_grid(in, 8, 0.05).lambdas);
    ebic_select(path, in, 0.0);
    for (std::size_t k = 0; k < path.estimates.size(); ++k) {
        const auto& e = path.estimates[k];
        const double bic = -2.0 * gaussian_loglik(e.omega, in) + static_cast<double>(e.edge_count()) * std::log(50.0);
        EXPECT_NEAR(path.ebic_scores[k], bic, 1e-9 * std::abs(bic));
    }
}

TEST(Ebic, PrefersSparserAtEqualLikelihood) {
    CovarianceInput in{Matrix::Identity(3, 3), 20};
    RegularizationPath path;
    PrecisionEstimate sparse, dense;
    sparse.omega = dense.omega = Matrix::Identity(3, 3);
    sparse.lambda = 0.5;
    dense.lambda = 0.1;
    dense.support = {{0, 1}, {1, 2}};
    path.lambdas = {0.5, 0.1};
    path.estimates = {dense, sparse};  // order irrelevant to the rule
    const auto sel = ebic_select(path, in, 0.5);
    EXPECT_EQ(sel.index, 1u);

    // Exact ties go to the larger lambda.
    RegularizationPath tie;
    PrecisionEstimate a = sparse, b = sparse;
    a.lambda = 0.2;
    b.lambda = 0.7;
    tie.estimates = {a, b};
    EXPECT_EQ(ebic_select(tie, in, 0.5).index, 1u);
}

TEST(Ebic, HubRecoveryBaseline) {
    // Regression baseline on one fixed Gaussian hub instance.
    const auto g = bench::gen_hub(30, 3, 17);
    const auto prec = bench::graph_to_precision(g, 1.0, 0.25, 18);
    PlnParams params{Vector::Zero(30), prec.omega};
    Eigen::LLT<Matrix> llt(prec.omega);
    std::mt19937_64 rng(19);
    std::normal_distribution<double> normal;
    Matrix x(150, 30);
    for (Eigen::Index j = 0; j < 150; ++j) {
        Vector e(30);
        for (auto& v : e) v = normal(rng);
        x.row(j) = llt.matrixU().solve(e).transpose();
    }
    const auto in = empirical_covariance(x);
    auto path = fit_path(in, lambda_grid(in, 50, 0.01).lambdas);
    const auto sel = ebic_select(path, in, 0.5);
    const auto& est = path.estimates[sel.index];
    std::size_t tp = 0;
    for (const auto& e : est.support) tp += std::count(g.edges.begin(), g.edges.end(), e);
    const double recall = static_cast<double>(tp) / static_cast<double>(g.edges.size());
    const double fdr = est.support.empty() ? 0.0 : 1.0 - static_cast<double>(tp) / static_cast<double>(est.support.size());
    EXPECT_GT(recall, 0.5);
    EXPECT_LT(fdr, 0.5);
}
