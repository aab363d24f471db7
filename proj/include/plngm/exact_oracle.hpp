#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "plngm/error.hpp"
#include "plngm/glasso.hpp"
#include "plngm/pln.hpp"
#include "plngm/posterior.hpp"
#include "plngm/types.hpp"

namespace plngm {

inline constexpr int kDefaultOraclePoints = 201;
inline constexpr double kOracleResolutionLimit = 1e-4;

/// Tensor-product integration box for the latent vector of one row.
struct OracleGrid {
    std::vector<double> lower;
    std::vector<double> upper;
    int points_per_axis = kDefaultOraclePoints;

    void validate() const {
        if (points_per_axis < 201) throw InputError("oracle grid needs at least 201 points per axis");
        if (lower.size() != upper.size() || lower.empty()) throw InputError("oracle grid bounds malformed");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i])) {
                throw InputError("oracle grid bounds must be finite with lower < upper");
            }
        }
    }
};

/**
 * Per coordinate: the posterior interval of a single count under the
 * marginal prior N(beta_i, [omega^{-1}]_ii), widened by a further 2 sd.
 */
inline OracleGrid make_oracle_grid(std::span<const std::int64_t> y_row, const Vector& beta, const Matrix& omega,
                                   int points_per_axis = kDefaultOraclePoints) {
    const Matrix sigma = omega.inverse();
    OracleGrid grid;
    grid.points_per_axis = points_per_axis;
    for (std::size_t i = 0; i < y_row.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double var = sigma(idx, idx);
        const auto box = posterior_interval(y_row[i], beta[idx], var);
        const double margin = 2.0 * std::sqrt(var);
        grid.lower.push_back(box.lo - margin);
        grid.upper.push_back(box.hi + margin);
    }
    return grid;
}

struct RowLoglik {
    double value = 0.0;            // at doubled resolution
    double resolution_change = 0;  // |value(2N-1 points) - value(N points)|
};

namespace detail {

/// Log integrand (without trapezoid weights) on a points^p tensor grid, row-major in the first axis.
inline std::vector<double> log_integrand_grid(std::span<const std::int64_t> y, const Vector& beta,
                                              const Matrix& omega, const OracleGrid& grid, int points,
                                              std::vector<double>& h) {
    const std::size_t p = y.size();
    std::vector<std::vector<double>> z(p), axis(p);
    h.assign(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        h[i] = (grid.upper[i] - grid.lower[i]) / static_cast<double>(points - 1);
        const double yd = static_cast<double>(y[i]);
        const double lg = std::lgamma(yd + 1.0);
        for (int k = 0; k < points; ++k) {
            const double zk = grid.lower[i] + h[i] * k;
            z[i].push_back(zk - beta[static_cast<Eigen::Index>(i)]);
            axis[i].push_back(yd * zk - std::exp(zk) - lg);
        }
    }
    std::vector<double> terms;
    if (p == 1) {
        const double o = omega(0, 0);
        terms.reserve(static_cast<std::size_t>(points));
        for (int a = 0; a < points; ++a) terms.push_back(axis[0][a] - 0.5 * o * z[0][a] * z[0][a]);
    } else {
        const double o11 = omega(0, 0), o12 = omega(0, 1), o22 = omega(1, 1);
        terms.reserve(static_cast<std::size_t>(points) * static_cast<std::size_t>(points));
        for (int a = 0; a < points; ++a) {
            const double za = z[0][a];
            const double base = axis[0][a] - 0.5 * o11 * za * za;
            for (int b = 0; b < points; ++b) {
                const double zb = z[1][b];
                terms.push_back(base + axis[1][b] - o12 * za * zb - 0.5 * o22 * zb * zb);
            }
        }
    }
    return terms;
}

/// log of the tensor trapezoid rule with `points` nodes per axis on grid.
inline double row_loglik_at(std::span<const std::int64_t> y, const Vector& beta, const Matrix& omega,
                            const OracleGrid& grid, int points) {
    const std::size_t p = y.size();
    Eigen::LLT<Matrix> llt(omega);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const double log_norm = -0.5 * static_cast<double>(p) * std::log(2.0 * M_PI) + 0.5 * logdet;

    std::vector<double> h;
    const auto terms = log_integrand_grid(y, beta, omega, grid, points, h);
    const double top = *std::max_element(terms.begin(), terms.end());
    auto edge = [&](std::size_t k) { return k == 0 || k == static_cast<std::size_t>(points - 1); };
    double sum = 0.0;
    for (std::size_t idx = 0; idx < terms.size(); ++idx) {
        double w = std::exp(terms[idx] - top);
        if (p == 1) {
            if (edge(idx)) w *= 0.5;
        } else {
            if (edge(idx / static_cast<std::size_t>(points))) w *= 0.5;
            if (edge(idx % static_cast<std::size_t>(points))) w *= 0.5;
        }
        sum += w;
    }
    double log_cell = 0.0;
    for (double hi : h) log_cell += std::log(hi);
    return top + std::log(sum) + log_cell + log_norm;
}

/**
 * Shrinks the box to the nodes whose log integrand is within kTrimDepth of
 * the maximum on a first pass, plus two cells of margin. The integrand is
 * log-concave, so that superlevel set is convex and the dropped region
 * carries relative mass below exp(-kTrimDepth) times the box volume.
 */
inline OracleGrid trim_once(std::span<const std::int64_t> y, const Vector& beta, const Matrix& omega,
                            const OracleGrid& grid) {
    constexpr double kTrimDepth = 60.0;
    const int points = grid.points_per_axis;
    const std::size_t p = y.size();
    std::vector<double> h;
    const auto terms = log_integrand_grid(y, beta, omega, grid, points, h);
    const double top = *std::max_element(terms.begin(), terms.end());
    std::vector<int> lo(p, points - 1), hi(p, 0);
    for (std::size_t idx = 0; idx < terms.size(); ++idx) {
        if (terms[idx] < top - kTrimDepth) continue;
        const int a = p == 1 ? static_cast<int>(idx) : static_cast<int>(idx / static_cast<std::size_t>(points));
        lo[0] = std::min(lo[0], a);
        hi[0] = std::max(hi[0], a);
        if (p == 2) {
            const int b = static_cast<int>(idx % static_cast<std::size_t>(points));
            lo[1] = std::min(lo[1], b);
            hi[1] = std::max(hi[1], b);
        }
    }
    OracleGrid out = grid;
    for (std::size_t i = 0; i < p; ++i) {
        const int a = std::max(lo[i] - 2, 0);
        const int b = std::min(hi[i] + 2, points - 1);
        out.lower[i] = grid.lower[i] + h[i] * a;
        out.upper[i] = grid.lower[i] + h[i] * b;
    }
    return out;
}

/**
 * Repeats trim_once until the box stops shrinking. A posterior narrower than
 * one cell of the starting grid collapses to a few cells per pass, and the
 * next pass resolves it.
 */
inline OracleGrid trim_oracle_grid(std::span<const std::int64_t> y, const Vector& beta, const Matrix& omega,
                                   const OracleGrid& grid) {
    OracleGrid box = grid;
    for (int pass = 0; pass < 50; ++pass) {
        OracleGrid next = trim_once(y, beta, omega, box);
        bool shrunk = false;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (next.upper[i] - next.lower[i] < 0.5 * (box.upper[i] - box.lower[i])) shrunk = true;
        }
        box = std::move(next);
        if (!shrunk) break;
    }
    return box;
}

inline void check_oracle_args(std::size_t p, const Vector& beta, const Matrix& omega) {
    if (p < 1 || p > 2) throw InputError("exact oracle supports p in {1, 2}");
    if (static_cast<std::size_t>(beta.size()) != p || static_cast<std::size_t>(omega.rows()) != p ||
        static_cast<std::size_t>(omega.cols()) != p) {
        throw InputError("exact oracle: dimension mismatch");
    }
    Eigen::LLT<Matrix> llt(omega);
    if (llt.info() != Eigen::Success) throw InputError("exact oracle: omega is not positive-definite");
}

} // namespace detail

/**
 * @brief log P(y_row | beta, omega) by tensor-product trapezoid quadrature.
 *
 * A first pass at grid.points_per_axis nodes locates the region carrying
 * the mass (trim_oracle_grid). On that box the rule is evaluated in log
 * space at N nodes and at the doubled resolution (2N - 1 nodes); the finer
 * value is returned. Throws NumericalError when the two differ by more
 * than 1e-4.
 */
inline RowLoglik exact_row_loglik(std::span<const std::int64_t> y_row, const Vector& beta, const Matrix& omega,
                                  const OracleGrid& grid) {
    detail::check_oracle_args(y_row.size(), beta, omega);
    grid.validate();
    if (grid.lower.size() != y_row.size()) throw InputError("exact oracle: grid dimension mismatch");
    const auto box = detail::trim_oracle_grid(y_row, beta, omega, grid);
    const double coarse = detail::row_loglik_at(y_row, beta, omega, box, box.points_per_axis);
    const double fine = detail::row_loglik_at(y_row, beta, omega, box, 2 * box.points_per_axis - 1);
    RowLoglik out{fine, std::abs(fine - coarse)};
    if (!(out.resolution_change <= kOracleResolutionLimit)) {
        throw NumericalError("exact oracle: grid too coarse (doubling changed log-likelihood by " +
                             std::to_string(out.resolution_change) + ")");
    }
    return out;
}

struct ExactLoglik {
    double value = 0.0;
    double loglik = 0.0;
    double penalty = 0.0;
    double max_resolution_change = 0.0;
};

/// Sum of exact row log-likelihoods minus lambda * sum_{i != k} |omega_ik|.
inline ExactLoglik penalized_loglik_exact(const CountMatrix& data, const Vector& beta, const Matrix& omega,
                                          double lambda, int points_per_axis = kDefaultOraclePoints) {
    const auto p = static_cast<std::size_t>(data.p());
    detail::check_oracle_args(p, beta, omega);
    ExactLoglik out;
    // Rows repeat often in count data; evaluate each distinct row once.
    std::map<std::vector<std::int64_t>, RowLoglik> cache;
    for (Eigen::Index j = 0; j < data.n(); ++j) {
        std::vector<std::int64_t> row(p);
        for (std::size_t i = 0; i < p; ++i) row[i] = data.values(j, static_cast<Eigen::Index>(i));
        auto it = cache.find(row);
        if (it == cache.end()) {
            const auto grid = make_oracle_grid(row, beta, omega, points_per_axis);
            it = cache.emplace(row, exact_row_loglik(row, beta, omega, grid)).first;
        }
        out.loglik += it->second.value;
        out.max_resolution_change = std::max(out.max_resolution_change, it->second.resolution_change);
    }
    out.penalty = lambda * (omega.cwiseAbs().sum() - omega.diagonal().cwiseAbs().sum());
    out.value = out.loglik - out.penalty;
    return out;
}

struct EmIncreaseReport {
    double ell_start = 0.0;
    double ell_onestep = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    int points_per_axis = kDefaultOraclePoints;
    double max_resolution_change = 0.0;
    bool increased = false;
    Matrix omega_start;
    Matrix omega_onestep;
    Vector beta0;
};

/**
 * @brief Checks that one transform-then-glasso step does not lower the exact
 * penalized log-likelihood.
 *
 * Omega^0 = diag(1 / sigma0) from moment_init; the step transforms the
 * counts, forms the expected latent covariance about beta0 (see
 * expected_latent_covariance) and fits glasso at lambda. Both precisions are
 * scored by penalized_loglik_exact with the same beta0. `seed` is recorded
 * for provenance; the computation itself is deterministic.
 */
inline EmIncreaseReport verify_em_increase(const CountMatrix& data, double lambda, std::uint64_t seed,
                                           int points_per_axis = kDefaultOraclePoints) {
    if (data.p() != 2) throw InputError("verify_em_increase: data must have exactly 2 variables");
    const auto start = moment_init(data);
    TransformOptions topts;
    topts.threads = 1;
    const auto transformed = transform_matrix(data, start, topts);
    const CovarianceInput cov{latent_covariance(transformed, CovarianceMode::em_expected), data.n()};
    const auto fit = glasso_fit(cov, lambda);

    EmIncreaseReport r;
    r.lambda = lambda;
    r.seed = seed;
    r.points_per_axis = points_per_axis;
    r.beta0 = start.beta0;
    r.omega_start = start.omega0();
    r.omega_onestep = fit.omega;
    const auto before = penalized_loglik_exact(data, start.beta0, r.omega_start, lambda, points_per_axis);
    const auto after = penalized_loglik_exact(data, start.beta0, r.omega_onestep, lambda, points_per_axis);
    r.ell_start = before.value;
    r.ell_onestep = after.value;
    r.max_resolution_change = std::max(before.max_resolution_change, after.max_resolution_change);
    r.increased = r.ell_onestep >= r.ell_start - 1e-6;
    return r;
}

} // namespace plngm
