#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plngm/detail/parallel.hpp"
#include "plngm/error.hpp"
#include "plngm/types.hpp"

namespace plngm {

/// Floor applied to the latent variance of underdispersed variables.
inline constexpr double kSigmaFloor = 1e-4;
/// Shrinkage weight used when no empirical-Bayes estimate is available.
inline constexpr double kDefaultShrinkage = 0.5;

/**
 * @brief Draws n iid rows from the Poisson log-normal model.
 *
 * Each row samples Z ~ N(beta, precision^{-1}) through the Cholesky factor of
 * the precision, then Y_i ~ Poisson(exp(Z_i)).
 */
inline CountMatrix sample_pln(const PlnParams& params, Eigen::Index n, std::uint64_t seed) {
    if (n < 1) throw InputError("sample_pln: n must be positive");
    if (params.precision.rows() != params.beta.size() || params.precision.cols() != params.beta.size()) {
        throw InputError("sample_pln: precision must be p x p");
    }
    Eigen::LLT<Matrix> llt(params.precision);
    if (llt.info() != Eigen::Success) {
        throw InputError("sample_pln: precision is not positive-definite (Cholesky failed)");
    }
    const Eigen::Index p = params.p();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    CountArray counts(n, p);
    Vector eps(p);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) eps[i] = normal(rng);
        // Omega = L L^T, so L^{-T} eps has covariance Omega^{-1}.
        const Vector z = params.beta + llt.matrixU().solve(eps);
        for (Eigen::Index i = 0; i < p; ++i) {
            const double rate = std::exp(z[i]);
            if (!(rate < 1e15)) {
                throw NumericalError("sample_pln: Poisson rate exp(" + std::to_string(z[i]) + ") too large");
            }
            if (rate < 1e-300) {
                counts(j, i) = 0;
                continue;
            }
            std::poisson_distribution<std::int64_t> pois(rate);
            counts(j, i) = pois(rng);
        }
    }
    return CountMatrix::from_values(std::move(counts));
}

struct MarginalMoments {
    double mean;
    double second_moment;
    bool overflow;
};

/// E(Y_i) and E(Y_i^2) of a single PLN coordinate.
inline MarginalMoments pln_marginal_moments(double beta, double sigma2) {
    const double mean = std::exp(beta + sigma2 / 2.0);
    const double second = mean + std::exp(2.0 * beta + 2.0 * sigma2);
    return {mean, second, !std::isfinite(mean) || !std::isfinite(second)};
}

struct MomentSolution {
    double beta;
    double sigma2;
    bool clamped;
};

/**
 * Inverts the first two raw moments of a PLN coordinate.
 *
 * beta = log(m1^2 / sqrt(m2 - m1)), sigma2 = log((m2 - m1) / m1^2). When the
 * implied sigma2 falls below kSigmaFloor (underdispersion) the variance is
 * clamped and beta keeps the mean: beta = log(m1) - sigma2 / 2.
 */
inline MomentSolution invert_moments(double m1, double m2) {
    if (!(m1 > 0.0)) throw InputError("invert_moments: first moment must be positive");
    const double excess = m2 - m1;
    if (excess > 0.0) {
        const double sigma2 = std::log(excess) - 2.0 * std::log(m1);
        if (sigma2 >= kSigmaFloor) {
            return {2.0 * std::log(m1) - 0.5 * std::log(excess), sigma2, false};
        }
    }
    return {std::log(m1) - kSigmaFloor / 2.0, kSigmaFloor, true};
}

namespace detail {

struct ColumnMoments {
    Vector mean;   // m1
    Vector raw2;   // m2, mean of squares
    Vector var;    // m2 - m1^2 (1/n normalisation)
};

inline ColumnMoments column_moments(const CountArray& values) {
    const Matrix y = values.cast<double>();
    const double n = static_cast<double>(y.rows());
    ColumnMoments out;
    out.mean = y.colwise().sum().transpose() / n;
    out.raw2 = y.array().square().colwise().sum().matrix().transpose() / n;
    // Centered form avoids cancellation in m2 - m1^2 for large counts.
    out.var = (y.rowwise() - out.mean.transpose()).array().square().colwise().sum().matrix().transpose() / n;
    return out;
}

} // namespace detail

/**
 * @brief Method-of-moments starting point, one variable at a time.
 *
 * All-zero columns are rejected. Underdispersed columns are clamped through
 * invert_moments and listed in `flagged`.
 */
inline InitialEstimate moment_init(const CountMatrix& data) {
    const auto mom = detail::column_moments(data.values);
    const Eigen::Index p = data.p();
    InitialEstimate est;
    est.beta0.resize(p);
    est.sigma0_diag.resize(p);
    est.origin = InitOrigin::moment;
    for (Eigen::Index i = 0; i < p; ++i) {
        if (mom.mean[i] <= 0.0) {
            throw InputError("moment_init: variable '" + data.variable_names.at(i) + "' is all zero");
        }
        // m2 - m1 computed as var + m1^2 - m1 to keep the centered variance.
        const double m1 = mom.mean[i];
        const double m2 = mom.var[i] + m1 * m1;
        const auto sol = invert_moments(m1, m2);
        est.beta0[i] = sol.beta;
        est.sigma0_diag[i] = sol.sigma2;
        if (sol.clamped) est.flagged.push_back(i);
    }
    return est;
}

/**
 * Linear trend of log variance against log mean across variables.
 *
 * `pc` is the leading principal direction of the log points around
 * `center`, with a positive first coordinate. `log_mean` / `log_var` keep
 * the per-variable points the trend was fitted on.
 */
struct MeanVarianceTrend {
    Eigen::Vector2d pc;
    Eigen::Vector2d center;
    Vector gamma;
    Vector log_mean;
    Vector log_var;

    Eigen::Index p() const { return log_mean.size(); }

    Eigen::Vector2d point(Eigen::Index i) const { return {log_mean[i], log_var[i]}; }

    /// Orthogonal projection of x onto the trend line.
    Eigen::Vector2d project(const Eigen::Vector2d& x) const { return pc.dot(x - center) * pc + center; }

    /// Signed perpendicular distance; positive above the line (more variance than trend).
    double signed_distance(const Eigen::Vector2d& x) const {
        const Eigen::Vector2d normal(-pc[1], pc[0]);
        return normal.dot(x - center);
    }
};

/// Fits the mean-variance trend from per-variable log moments.
inline MeanVarianceTrend fit_trend_from_moments(const Vector& mean, const Vector& var,
                                                const std::vector<std::string>& names = {}) {
    const Eigen::Index p = mean.size();
    if (p < 2) throw InputError("fit_trend: need at least 2 variables");
    auto name = [&](Eigen::Index i) {
        return i < static_cast<Eigen::Index>(names.size()) ? names[i] : std::to_string(i);
    };
    MeanVarianceTrend t;
    t.log_mean.resize(p);
    t.log_var.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(mean[i] > 0.0)) throw InputError("fit_trend: variable '" + name(i) + "' has zero mean");
        if (!(var[i] > 0.0)) throw InputError("fit_trend: variable '" + name(i) + "' has zero variance");
        t.log_mean[i] = std::log(mean[i]);
        t.log_var[i] = std::log(var[i]);
    }
    t.center = {t.log_mean.mean(), t.log_var.mean()};

    Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
    for (Eigen::Index i = 0; i < p; ++i) {
        const Eigen::Vector2d d = t.point(i) - t.center;
        scatter += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
    t.pc = eig.eigenvectors().col(1).normalized();
    if (t.pc[0] < 0.0 || (t.pc[0] == 0.0 && t.pc[1] < 0.0)) t.pc = -t.pc;
    t.gamma = Vector::Constant(p, kDefaultShrinkage);
    return t;
}

inline MeanVarianceTrend fit_trend(const CountMatrix& data) {
    const auto mom = detail::column_moments(data.values);
    return fit_trend_from_moments(mom.mean, mom.var, data.variable_names);
}

/**
 * @brief Shrinks each variable's (mean, variance) toward the fitted trend.
 *
 * (E, Var) = gamma_i * (m_i, v_i) + (1 - gamma_i) * exp(P_i), then the moment
 * inversion runs with m1 = E and m2 = Var + E^2.
 */
inline InitialEstimate mirna_shrink_init(const CountMatrix& data, const MeanVarianceTrend& trend,
                                         std::span<const double> gamma) {
    const auto mom = detail::column_moments(data.values);
    const Eigen::Index p = data.p();
    if (trend.p() != p) throw InputError("mirna_shrink_init: trend was fitted on a different variable set");
    if (static_cast<Eigen::Index>(gamma.size()) != p) throw InputError("mirna_shrink_init: gamma length mismatch");

    InitialEstimate est;
    est.beta0.resize(p);
    est.sigma0_diag.resize(p);
    est.origin = InitOrigin::mirna_shrunk;
    for (Eigen::Index i = 0; i < p; ++i) {
        const double g = gamma[i];
        if (!(g > 0.0 && g < 1.0)) throw InputError("mirna_shrink_init: gamma must lie in (0, 1)");
        const Eigen::Vector2d on_trend = trend.project(trend.point(i)).array().exp();
        const double e = g * mom.mean[i] + (1.0 - g) * on_trend[0];
        const double v = g * mom.var[i] + (1.0 - g) * on_trend[1];
        const auto sol = invert_moments(e, v + e * e);
        est.beta0[i] = sol.beta;
        est.sigma0_diag[i] = sol.sigma2;
        if (sol.clamped) est.flagged.push_back(i);
    }
    return est;
}

inline InitialEstimate mirna_shrink_init(const CountMatrix& data, const MeanVarianceTrend& trend, double gamma) {
    std::vector<double> g(static_cast<std::size_t>(data.p()), gamma);
    return mirna_shrink_init(data, trend, g);
}

/// Conjugate normal shrinkage factor: posterior mean of the true distance is weight * d.
inline double eb_shrinkage_weight(double sigma2_d, double sigma2_r) {
    return sigma2_r / (sigma2_r + sigma2_d);
}

struct EbGammaResult {
    Vector gamma;
    Vector distance;          // d_i on the full data
    Vector sigma2_distance;   // bootstrap variance of d_i
    double sigma2_prior = 0;  // sigma_r^2
    std::vector<Eigen::Index> flagged;
};

/**
 * @brief Empirical-Bayes per-variable shrinkage weights.
 *
 * Bootstrap resamples of the rows give the measurement variance of each
 * variable's signed distance to the trend. The prior variance of true
 * distances is (1.4826 * MAD(d))^2 minus the median measurement variance,
 * floored at 1e-6. Variables whose bootstrap variance is zero (or that are
 * undefined in fewer than two replicates) fall back to kDefaultShrinkage.
 */
inline EbGammaResult eb_gamma(const CountMatrix& data, const MeanVarianceTrend& trend, int bootstrap_reps,
                              std::uint64_t seed) {
    if (bootstrap_reps < 50) throw InputError("eb_gamma: bootstrap_reps must be >= 50");
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.p();
    if (trend.p() != p) throw InputError("eb_gamma: trend was fitted on a different variable set");

    EbGammaResult out;
    out.distance.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) out.distance[i] = trend.signed_distance(trend.point(i));

    // Welford accumulators per variable.
    std::vector<double> count(p, 0.0), mean(p, 0.0), m2(p, 0.0);
    CountArray resampled(n, p);
    for (int r = 0; r < bootstrap_reps; ++r) {
        std::mt19937_64 rng(detail::derive_seed(seed, static_cast<std::uint64_t>(r)));
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        for (Eigen::Index j = 0; j < n; ++j) resampled.row(j) = data.values.row(pick(rng));
        const auto mom = detail::column_moments(resampled);
        for (Eigen::Index i = 0; i < p; ++i) {
            if (!(mom.mean[i] > 0.0) || !(mom.var[i] > 0.0)) continue;
            const double d = trend.signed_distance({std::log(mom.mean[i]), std::log(mom.var[i])});
            count[i] += 1.0;
            const double delta = d - mean[i];
            mean[i] += delta / count[i];
            m2[i] += delta * (d - mean[i]);
        }
    }
    out.sigma2_distance.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        out.sigma2_distance[i] = count[i] >= 2.0 ? m2[i] / (count[i] - 1.0) : 0.0;
    }

    auto median = [](std::vector<double> v) {
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        double hi = *mid;
        if (v.size() % 2 == 1) return hi;
        double lo = *std::max_element(v.begin(), mid);
        return 0.5 * (lo + hi);
    };
    std::vector<double> d(out.distance.data(), out.distance.data() + p);
    const double med_d = median(d);
    std::vector<double> absdev(d.size());
    std::transform(d.begin(), d.end(), absdev.begin(), [&](double x) { return std::abs(x - med_d); });
    const double mad_sd = 1.4826 * median(absdev);
    std::vector<double> s2(out.sigma2_distance.data(), out.sigma2_distance.data() + p);
    out.sigma2_prior = std::max(mad_sd * mad_sd - median(s2), 1e-6);

    out.gamma.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double s2i = out.sigma2_distance[i];
        double g = s2i > 0.0 ? eb_shrinkage_weight(s2i, out.sigma2_prior) : 0.0;
        // Keep weights strictly inside (0, 1); exact 0/1 means the estimate is degenerate.
        if (!(g > 0.0 && g < 1.0)) {
            g = kDefaultShrinkage;
            out.flagged.push_back(i);
        }
        out.gamma[i] = g;
    }
    return out;
}

} // namespace plngm
