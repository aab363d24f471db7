#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "plngm/error.hpp"
#include "plngm/types.hpp"

namespace plngm {

inline constexpr double kDefaultGlassoTol = 1e-6;
inline constexpr int kDefaultMaxSweeps = 10000;
inline constexpr double kSupportTol = 1e-8;

/// Empirical covariance and the sample count that produced it.
struct CovarianceInput {
    Matrix s;
    Eigen::Index n = 0;

    Eigen::Index p() const { return s.rows(); }

    void validate() const {
        if (s.rows() != s.cols() || s.rows() < 1) throw InputError("covariance must be a non-empty square matrix");
        if (!s.allFinite()) throw InputError("covariance has non-finite entries");
        if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw InputError("covariance is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-8) {
            throw InputError("covariance is not positive semi-definite (min eigenvalue " +
                             std::to_string(eig.eigenvalues().minCoeff()) + ")");
        }
    }
};

/// Empirical covariance (1/n normalization) of the rows of x.
inline CovarianceInput empirical_covariance(const Matrix& x) {
    const Vector mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    Matrix s = centered.transpose() * centered / static_cast<double>(x.rows());
    s = 0.5 * (s + s.transpose());
    return {std::move(s), x.rows()};
}

using Edge = std::pair<Eigen::Index, Eigen::Index>;

/**
 * Penalized Gaussian MLE of the precision matrix.
 *
 * `covariance` is the solver's working estimate of omega^{-1}; warm starts
 * reuse it. `dual_gap` is the gap between the dual bound -log det W - p
 * and the achieved objective.
 */
struct PrecisionEstimate {
    Matrix omega;
    Matrix covariance;
    double lambda = 0.0;
    std::vector<Edge> support;
    double objective = 0.0;
    double dual_gap = 0.0;
    int sweeps = 0;
    std::vector<double> dual_trace;  // log det W after each sweep, when requested

    std::size_t edge_count() const { return support.size(); }
};

class GlassoError : public NumericalError {
public:
    GlassoError(const std::string& what, PrecisionEstimate last, double change)
        : NumericalError(what), last_iterate(std::move(last)), last_change(change) {}

    PrecisionEstimate last_iterate;
    double last_change;
};

/// Off-diagonal pairs i < k with |omega_ik| > kSupportTol * sqrt(omega_ii * omega_kk).
inline std::vector<Edge> extract_support(const Matrix& omega) {
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < omega.rows(); ++i) {
        for (Eigen::Index k = i + 1; k < omega.cols(); ++k) {
            if (std::abs(omega(i, k)) > kSupportTol * std::sqrt(omega(i, i) * omega(k, k))) edges.emplace_back(i, k);
        }
    }
    return edges;
}

/// log det(omega) - tr(S omega) - lambda * sum_{i != k} |omega_ik|.
inline double surrogate_objective(const Matrix& omega, const CovarianceInput& input, double lambda) {
    if (omega.rows() != input.p() || omega.cols() != input.p()) throw InputError("objective: dimension mismatch");
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw InputError("objective: omega is not positive-definite");
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double trace = (input.s.cwiseProduct(omega)).sum();
    const double off_l1 = omega.cwiseAbs().sum() - omega.diagonal().cwiseAbs().sum();
    return logdet - trace - lambda * off_l1;
}

struct GlassoOptions {
    double tol = kDefaultGlassoTol;
    int max_sweeps = kDefaultMaxSweeps;
    bool record_trace = false;
};

namespace detail {

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// omega_jj = 1 / (W_jj - w_12' beta), omega_12 = -beta * omega_jj, symmetrized.
inline Matrix precision_from_regressions(const Matrix& w, const Matrix& b) {
    const Eigen::Index p = w.rows();
    Matrix omega(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double ojj = 1.0 / (w(j, j) - w.col(j).dot(b.col(j)));
        omega.col(j) = -b.col(j) * ojj;
        omega(j, j) = ojj;
    }
    return 0.5 * (omega + omega.transpose());
}

inline double log_det_spd(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

} // namespace detail

/**
 * Largest violation of the subgradient conditions at omega: |S_ii - W_ii|,
 * |S_ik - W_ik + lambda sign(omega_ik)| on the support and
 * max(0, |S_ik - W_ik| - lambda) off it, with W = omega^{-1}.
 */
inline double kkt_residual(const Matrix& omega, const CovarianceInput& input, double lambda) {
    const Eigen::Index p = input.p();
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    const Matrix w = llt.solve(Matrix::Identity(p, p));
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index k = 0; k < p; ++k) {
            const double g = input.s(i, k) - w(i, k);
            double v;
            if (i == k) {
                v = std::abs(g);
            } else if (std::abs(omega(i, k)) > kSupportTol * std::sqrt(omega(i, i) * omega(k, k))) {
                v = std::abs(g + lambda * (omega(i, k) > 0.0 ? 1.0 : -1.0));
            } else {
                v = std::max(0.0, std::abs(g) - lambda);
            }
            worst = std::max(worst, v);
        }
    }
    return worst;
}

/**
 * @brief Maximizes log det(omega) - tr(S omega) - lambda * ||omega||_1,off.
 *
 * Block coordinate ascent over columns of the working covariance W; each
 * column is an l1-regularized quadratic problem solved by cyclic coordinate
 * descent. Diagonal entries are unpenalized, so W_ii = S_ii throughout.
 * Converged when the largest change of W over a sweep is below
 * tol * mean(|S_ii|) and the subgradient conditions hold within tol / 2. lambda = 0 is solved by direct inversion.
 */
inline PrecisionEstimate glasso_fit(const CovarianceInput& input, double lambda,
                                    const PrecisionEstimate* warm_start = nullptr, const GlassoOptions& opts = {}) {
    input.validate();
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("glasso: lambda must be non-negative");
    if (!(opts.tol > 0.0)) throw InputError("glasso: tol must be positive");
    const Eigen::Index p = input.p();
    const Matrix& s = input.s;

    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(s(i, i) > 0.0)) throw InputError("glasso: covariance has a non-positive diagonal entry at " + std::to_string(i));
    }

    PrecisionEstimate est;
    est.lambda = lambda;

    if (lambda == 0.0) {
        Eigen::LLT<Matrix> llt(s);
        if (llt.info() != Eigen::Success) throw InputError("glasso: lambda = 0 requires a positive-definite covariance");
        est.omega = llt.solve(Matrix::Identity(p, p));
        est.omega = 0.5 * (est.omega + est.omega.transpose());
        est.covariance = s;
        est.support = extract_support(est.omega);
        est.objective = surrogate_objective(est.omega, input, 0.0);
        est.dual_gap = -detail::log_det_spd(s) - static_cast<double>(p) - est.objective;
        return est;
    }

    // W: working covariance; B(:, j): regression of column j on the rest.
    Matrix w = s;
    Matrix b = Matrix::Zero(p, p);
    if (warm_start != nullptr && warm_start->covariance.rows() == p && warm_start->omega.rows() == p) {
        w = warm_start->covariance;
        w.diagonal() = s.diagonal();
        for (Eigen::Index j = 0; j < p; ++j) {
            b.col(j) = -warm_start->omega.col(j) / warm_start->omega(j, j);
            b(j, j) = 0.0;
        }
    }

    const double scale = s.diagonal().cwiseAbs().mean();
    const double threshold = opts.tol * scale;
    const double inner_threshold = 1e-3 * threshold;
    Vector u(p);
    double change = std::numeric_limits<double>::infinity();
    int sweep = 0;

    for (; sweep < opts.max_sweeps; ++sweep) {
        change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            auto beta = b.col(j);
            u.noalias() = w * beta;
            for (int inner = 0; inner < 10000; ++inner) {
                double delta_max = 0.0;
                for (Eigen::Index k = 0; k < p; ++k) {
                    if (k == j) continue;
                    const double wkk = w(k, k);
                    const double r = s(k, j) - u[k] + wkk * beta[k];
                    const double updated = detail::soft_threshold(r, lambda) / wkk;
                    const double delta = updated - beta[k];
                    if (delta != 0.0) {
                        beta[k] = updated;
                        u.noalias() += delta * w.col(k);
                        delta_max = std::max(delta_max, std::abs(delta) * wkk);
                    }
                }
                if (delta_max < inner_threshold) break;
            }
            for (Eigen::Index k = 0; k < p; ++k) {
                if (k == j) continue;
                change = std::max(change, std::abs(u[k] - w(k, j)));
                w(k, j) = u[k];
                w(j, k) = u[k];
            }
        }
        if (opts.record_trace) est.dual_trace.push_back(detail::log_det_spd(w));
        if (change < threshold && kkt_residual(detail::precision_from_regressions(w, b), input, lambda) < 0.5 * opts.tol) {
            ++sweep;
            break;
        }
        if (change < threshold) change = threshold;  // certificate not yet met; keep sweeping
    }
    Matrix omega = detail::precision_from_regressions(w, b);


    est.omega = std::move(omega);
    est.covariance = std::move(w);
    est.sweeps = sweep;
    est.support = extract_support(est.omega);

    Eigen::LLT<Matrix> check(est.omega);
    if (check.info() != Eigen::Success) {
        throw GlassoError("glasso: estimate is not positive-definite at lambda=" + std::to_string(lambda), est, change);
    }
    est.objective = surrogate_objective(est.omega, input, lambda);
    est.dual_gap = -detail::log_det_spd(est.covariance) - static_cast<double>(p) - est.objective;
    if (!(change < threshold)) {
        throw GlassoError("glasso: no convergence after " + std::to_string(opts.max_sweeps) +
                              " sweeps at lambda=" + std::to_string(lambda) + " (last change " + std::to_string(change) + ")",
                          est, change);
    }
    return est;
}

struct LambdaGrid {
    std::vector<double> lambdas;
    double lambda_max = 0.0;
    bool degenerate = false;
};

inline double max_off_diagonal(const Matrix& s) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index k = 0; k < s.cols(); ++k) {
            if (i != k) m = std::max(m, std::abs(s(i, k)));
        }
    }
    return m;
}

/**
 * Geometric grid from lambda_max = max_{i != k} |s_ik| down to
 * ratio * lambda_max. Without off-diagonal signal the grid is the single
 * nominal value mean(S_ii) and `degenerate` is set.
 */
inline LambdaGrid lambda_grid(const CovarianceInput& input, int count, double ratio) {
    if (count < 2) throw InputError("lambda_grid: count must be >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("lambda_grid: ratio must lie in (0, 1)");
    LambdaGrid grid;
    grid.lambda_max = max_off_diagonal(input.s);
    if (!(grid.lambda_max > 0.0)) {
        grid.degenerate = true;
        grid.lambdas = {input.s.diagonal().cwiseAbs().mean()};
        return grid;
    }
    grid.lambdas.resize(static_cast<std::size_t>(count));
    const double log_hi = std::log(grid.lambda_max);
    const double log_lo = std::log(ratio * grid.lambda_max);
    for (int i = 0; i < count; ++i) {
        grid.lambdas[static_cast<std::size_t>(i)] =
            std::exp(log_hi + (log_lo - log_hi) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
    grid.lambdas.front() = grid.lambda_max;
    return grid;
}

struct PathFailure {
    double lambda;
    std::string message;
};

struct RegularizationPath {
    std::vector<double> lambdas;
    std::vector<PrecisionEstimate> estimates;
    std::vector<double> ebic_scores;
    std::vector<PathFailure> failures;
};

/// Fits each lambda in order, warm-starting from the previous success.
inline RegularizationPath fit_path(const CovarianceInput& input, const std::vector<double>& lambdas,
                                   const GlassoOptions& opts = {}) {
    if (lambdas.empty()) throw InputError("fit_path: empty lambda sequence");
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (!(lambdas[i] < lambdas[i - 1])) throw InputError("fit_path: lambdas must be strictly decreasing");
    }
    RegularizationPath path;
    const PrecisionEstimate* warm = nullptr;
    for (double lambda : lambdas) {
        try {
            path.estimates.push_back(glasso_fit(input, lambda, warm, opts));
            path.lambdas.push_back(lambda);
            warm = &path.estimates.back();
        } catch (const Error& e) {
            path.failures.push_back({lambda, e.what()});
        }
    }
    return path;
}

/// (n / 2) * (log det omega - tr(S omega)).
inline double gaussian_loglik(const Matrix& omega, const CovarianceInput& input) {
    return 0.5 * static_cast<double>(input.n) * surrogate_objective(omega, input, 0.0);
}

/// -2 l + |E| log n + 4 |E| gamma log p.
inline double ebic_score(const PrecisionEstimate& est, const CovarianceInput& input, double gamma_ebic) {
    const double edges = static_cast<double>(est.edge_count());
    const double n = static_cast<double>(input.n);
    const double p = static_cast<double>(input.p());
    return -2.0 * gaussian_loglik(est.omega, input) + edges * std::log(n) + 4.0 * edges * gamma_ebic * std::log(p);
}

struct EbicSelection {
    std::size_t index = 0;
    double lambda = 0.0;
    double score = 0.0;
};

/**
 * Scores every path element by eBIC (filling path.ebic_scores) and returns
 * the minimizer; ties go to the larger lambda.
 */
inline EbicSelection ebic_select(RegularizationPath& path, const CovarianceInput& input, double gamma_ebic) {
    if (path.estimates.empty()) throw InputError("ebic_select: path has no estimates");
    if (!(gamma_ebic >= 0.0 && gamma_ebic <= 1.0)) throw InputError("ebic_select: gamma must lie in [0, 1]");
    path.ebic_scores.clear();
    EbicSelection best;
    best.score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.estimates.size(); ++i) {
        const double score = ebic_score(path.estimates[i], input, gamma_ebic);
        path.ebic_scores.push_back(score);
        const bool better = score < best.score ||
                            (score == best.score && path.estimates[i].lambda > path.estimates[best.index].lambda);
        if (better) best = {i, path.estimates[i].lambda, score};
    }
    return best;
}

} // namespace plngm
