#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "plngm/detail/parallel.hpp"
#include "plngm/detail/quadrature.hpp"
#include "plngm/error.hpp"
#include "plngm/types.hpp"

namespace plngm {

inline constexpr std::int64_t kDefaultLargeCountThreshold = 10000;
inline constexpr double kDefaultRelTol = 1e-8;

/// Quadrature failure for a single cell; carries the inputs that caused it.
class QuadratureError : public NumericalError {
public:
    QuadratureError(std::int64_t y, double beta, double sigma2, const std::string& detail)
        : NumericalError(describe(y, beta, sigma2, detail)), y(y), beta(beta), sigma2(sigma2) {}

    std::int64_t y;
    double beta;
    double sigma2;

private:
    static std::string describe(std::int64_t y, double beta, double sigma2, const std::string& detail) {
        std::ostringstream os;
        os.precision(17);
        os << "posterior quadrature failed for y=" << y << ", beta=" << beta << ", sigma2=" << sigma2 << ": "
           << detail;
        return os.str();
    }
};

/// The bounded interval every posterior summary is computed on:
/// min/max of log+(y) and beta, widened by 10 prior standard deviations.
struct PosteriorInterval {
    double lo;
    double hi;
};

inline double log_plus(std::int64_t y) { return std::log(static_cast<double>(std::max<std::int64_t>(y, 1))); }

inline PosteriorInterval posterior_interval(std::int64_t y, double beta, double sigma2) {
    const double sd = std::sqrt(sigma2);
    const double ly = log_plus(y);
    return {std::min(ly, beta) - 10.0 * sd, std::max(ly, beta) + 10.0 * sd};
}

/**
 * Log of the unnormalized posterior density of the latent coordinate,
 * log[ Poisson(y; e^z) * N(z; beta, sigma2) ], including the log y! and
 * Gaussian normalizing constants.
 */
inline double log_posterior_kernel(double z, std::int64_t y, double beta, double sigma2) {
    const double yd = static_cast<double>(y);
    const double dz = z - beta;
    return -std::exp(z) + z * yd - std::lgamma(yd + 1.0) - dz * dz / (2.0 * sigma2) -
           0.5 * std::log(2.0 * M_PI * sigma2);
}

namespace detail {

inline void check_posterior_args(std::int64_t y, double beta, double sigma2) {
    if (y < 0) throw InputError("posterior: count must be non-negative");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("posterior: sigma2 must be positive and finite");
    if (!std::isfinite(beta)) throw InputError("posterior: beta must be finite");
}

} // namespace detail

/**
 * @brief Maximizer of the log posterior of the latent coordinate.
 *
 * Solves y - e^z - (z - beta) / sigma2 = 0 by Newton steps kept inside a
 * sign-change bracket (bisection when a step leaves it). The objective is
 * strictly concave, so the root is unique.
 */
inline double posterior_mode(std::int64_t y, double beta, double sigma2) {
    detail::check_posterior_args(y, beta, sigma2);
    const double yd = static_cast<double>(y);
    auto grad = [&](double z) { return yd - std::exp(z) - (z - beta) / sigma2; };

    // grad(lo) > 0 > grad(hi).
    double lo, hi;
    if (y == 0) {
        hi = beta;
        lo = beta - sigma2 * std::exp(beta);
        if (!(grad(lo) > 0.0)) lo = beta - 1.0;
        while (!(grad(lo) > 0.0)) lo = beta - 2.0 * (beta - lo);
    } else {
        const double ly = std::log(yd);
        lo = std::min(ly, beta);
        hi = std::max(ly, beta);
        if (!(hi > lo)) return lo;
    }

    double z = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double g = grad(z);
        if (g == 0.0) return z;
        if (g > 0.0) lo = z; else hi = z;
        const double h = -std::exp(z) - 1.0 / sigma2;
        double next = z - g / h;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - z) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(z))) {
            // Converged to working precision; keep whichever end has the smaller gradient.
            return std::abs(grad(next)) < std::abs(g) ? next : z;
        }
        z = next;
    }
    return z;
}

struct PosteriorMoments {
    double mean;
    double variance;
    double mode;
};

/**
 * @brief Posterior mean and variance by adaptive quadrature.
 *
 * Integrates over posterior_interval. The kernel is rescaled by its value at
 * the mode and the interval is split into panels growing geometrically away
 * from the mode, so sharply peaked posteriors are resolved. Throws
 * QuadratureError when the refinement budget runs out.
 */
inline PosteriorMoments posterior_moments(std::int64_t y, double beta, double sigma2, double rel_tol = kDefaultRelTol) {
    detail::check_posterior_args(y, beta, sigma2);
    if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw InputError("posterior: rel_tol must lie in (0, 1e-2]");

    const auto [lo, hi] = posterior_interval(y, beta, sigma2);
    const double mode = posterior_mode(y, beta, sigma2);
    const double anchor = std::clamp(mode, lo, hi);
    const double yd = static_cast<double>(y);
    const double e_anchor = std::exp(anchor);
    const double d_anchor = anchor - beta;

    // log g(z) - log g(anchor), arranged so large terms cancel analytically.
    auto weighted = [&](double z) {
        const double u = z - anchor;
        const double dz = z - beta;
        const double logw = -e_anchor * std::expm1(u) + yd * u - (dz * dz - d_anchor * d_anchor) / (2.0 * sigma2);
        const double w = std::exp(logw);
        return std::array<double, 3>{w, u * w, u * u * w};
    };

    const double scale = 1.0 / std::sqrt(std::exp(anchor) + 1.0 / sigma2);
    std::vector<double> breaks{lo};
    std::vector<double> left, right;
    for (double step = scale; anchor - step > lo; step *= 2.0) left.push_back(anchor - step);
    for (double step = scale; anchor + step < hi; step *= 2.0) right.push_back(anchor + step);
    breaks.insert(breaks.end(), left.rbegin(), left.rend());
    if (anchor > lo && anchor < hi) breaks.push_back(anchor);
    breaks.insert(breaks.end(), right.begin(), right.end());
    breaks.push_back(hi);

    const auto q = detail::integrate_adaptive<3>(weighted, breaks, rel_tol);
    if (!q.converged) {
        throw QuadratureError(y, beta, sigma2, "refinement budget exhausted");
    }
    if (!(q.value[0] > 0.0) || !std::isfinite(q.value[0])) {
        throw QuadratureError(y, beta, sigma2, "normalizing integral is not positive");
    }
    const double shift = q.value[1] / q.value[0];
    const double variance = std::max(q.value[2] / q.value[0] - shift * shift, 0.0);
    return {anchor + shift, variance, mode};
}

inline double posterior_mean(std::int64_t y, double beta, double sigma2, double rel_tol = kDefaultRelTol) {
    return posterior_moments(y, beta, sigma2, rel_tol).mean;
}

enum class TransformMethod : std::uint8_t { mean_quadrature, mode_newton };

struct TransformOptions {
    std::int64_t large_count_threshold = kDefaultLargeCountThreshold;
    double rel_tol = kDefaultRelTol;
    unsigned threads = detail::default_threads();
};

/**
 * n x p posterior summaries of the latent coordinates.
 *
 * `variance` holds the posterior variance of each cell (quadrature for the
 * mean branch, the inverse curvature at the mode for the mode branch).
 */
struct TransformedMatrix {
    Matrix values;
    Matrix variance;
    std::vector<TransformMethod> method_used;  // row-major n x p
    InitialEstimate estimate;
    TransformOptions options;

    TransformMethod method(Eigen::Index row, Eigen::Index col) const {
        return method_used[static_cast<std::size_t>(row * values.cols() + col)];
    }

    std::size_t count(TransformMethod m) const {
        return static_cast<std::size_t>(std::count(method_used.begin(), method_used.end(), m));
    }
};

/**
 * @brief Replaces every count by the posterior mean of its latent coordinate.
 *
 * Cells with y >= large_count_threshold use the posterior mode instead.
 * Values are memoized per (column, y); columns run in parallel and the
 * result does not depend on the thread count.
 */
inline TransformedMatrix transform_matrix(const CountMatrix& data, const InitialEstimate& estimate,
                                          const TransformOptions& options = {}) {
    estimate.validate();
    if (estimate.p() != data.p()) {
        throw InputError("transform_matrix: estimate covers " + std::to_string(estimate.p()) +
                         " variables, data has " + std::to_string(data.p()));
    }
    if (options.large_count_threshold < 0) throw InputError("transform_matrix: threshold must be non-negative");

    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    TransformedMatrix out;
    out.values.resize(n, p);
    out.variance.resize(n, p);
    out.method_used.assign(static_cast<std::size_t>(n * p), TransformMethod::mean_quadrature);
    out.estimate = estimate;
    out.options = options;

    detail::parallel_for(static_cast<std::size_t>(p), options.threads, [&](std::size_t col) {
        const auto i = static_cast<Eigen::Index>(col);
        const double beta = estimate.beta0[i];
        const double sigma2 = estimate.sigma0_diag[i];
        struct Cell {
            double mean;
            double var;
            TransformMethod method;
        };
        std::unordered_map<std::int64_t, Cell> memo;
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::int64_t y = data.values(j, i);
            auto it = memo.find(y);
            if (it == memo.end()) {
                Cell cell{};
                if (y < options.large_count_threshold) {
                    try {
                        const auto m = posterior_moments(y, beta, sigma2, options.rel_tol);
                        cell = {m.mean, m.variance, TransformMethod::mean_quadrature};
                    } catch (const QuadratureError& e) {
                        throw NumericalError("transform_matrix: cell (row " + std::to_string(j) + ", column '" +
                                             data.variable_names.at(col) + "'): " + e.what());
                    }
                } else {
                    const auto [lo, hi] = posterior_interval(y, beta, sigma2);
                    const double mode = std::clamp(posterior_mode(y, beta, sigma2), lo, hi);
                    cell = {mode, 1.0 / (std::exp(mode) + 1.0 / sigma2), TransformMethod::mode_newton};
                }
                it = memo.emplace(y, cell).first;
            }
            out.values(j, i) = it->second.mean;
            out.variance(j, i) = it->second.var;
            out.method_used[static_cast<std::size_t>(j * p + i)] = it->second.method;
        }
    });
    return out;
}

enum class CovarianceMode { empirical, em_expected };

/**
 * Latent covariance estimate from a transformed matrix.
 *
 * empirical: covariance of the posterior means about their sample mean.
 * em_expected: (1/n) sum_j E[(Z^j - beta0)(Z^j - beta0)' | Y^j] under the
 * diagonal starting precision, i.e. posterior means centered at beta0 with
 * the average posterior variance added to the diagonal.
 */
inline Matrix latent_covariance(const TransformedMatrix& t, CovarianceMode mode) {
    const double n = static_cast<double>(t.values.rows());
    Matrix s;
    if (mode == CovarianceMode::empirical) {
        const Vector mean = t.values.colwise().mean().transpose();
        const Matrix centered = t.values.rowwise() - mean.transpose();
        s = centered.transpose() * centered / n;
    } else {
        const Matrix centered = t.values.rowwise() - t.estimate.beta0.transpose();
        s = centered.transpose() * centered / n;
        s.diagonal() += t.variance.colwise().mean().transpose();
    }
    return 0.5 * (s + s.transpose());
}

} // namespace plngm
