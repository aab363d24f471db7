#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plngm/plngm.hpp"

namespace plngm::test {

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(Eigen::Index p, std::mt19937_64& rng, double lo = 0.2, double hi = 3.0) {
    std::normal_distribution<double> normal;
    Matrix a(p, p);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    std::uniform_real_distribution<double> unif(lo, hi);
    Vector ev(p);
    for (Eigen::Index i = 0; i < p; ++i) ev[i] = unif(rng);
    Matrix m = q * ev.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

/// Sample covariance of n Gaussian draws with covariance sigma (always PSD).
inline CovarianceInput random_covariance(Eigen::Index p, Eigen::Index n, std::mt19937_64& rng) {
    const Matrix sigma = random_spd(p, rng, 0.3, 2.0);
    Eigen::LLT<Matrix> llt(sigma);
    std::normal_distribution<double> normal;
    Matrix x(n, p);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector e(p);
        for (Eigen::Index i = 0; i < p; ++i) e[i] = normal(rng);
        x.row(j) = (llt.matrixL() * e).transpose();
    }
    return empirical_covariance(x);
}

/**
 * Count matrix shaped like a bulk sequencing study: wide range of means
 * (some variables near 10^6), overdispersed. Low-mean variables give about
 * 15% zeros on their own; dropout tops up to `zero_fraction` if needed.
 */
inline CountMatrix synthetic_counts(Eigen::Index n, Eigen::Index p, std::uint64_t seed, double zero_fraction = 0.15) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> beta_dist(-2.7, 11.5);
    std::uniform_real_distribution<double> var_dist(0.3, 1.2);
    PlnParams params{Vector(p), Matrix::Zero(p, p)};
    for (Eigen::Index i = 0; i < p; ++i) {
        params.beta[i] = beta_dist(rng);
        params.precision(i, i) = 1.0 / var_dist(rng);
    }
    // Sparse chain dependence between neighbours.
    for (Eigen::Index i = 0; i + 1 < p; i += 2) {
        const double c = 0.3 * std::sqrt(params.precision(i, i) * params.precision(i + 1, i + 1));
        params.precision(i, i + 1) = params.precision(i + 1, i) = c;
    }
    auto data = sample_pln(params, n, plngm::detail::derive_seed(seed, 1));
    for (Eigen::Index k = 0; k < data.values.size(); ++k) {
        data.values.data()[k] = std::min<std::int64_t>(data.values.data()[k], 1000000);
    }
    const double natural = static_cast<double>((data.values.array() == 0).count()) / static_cast<double>(data.values.size());
    if (natural < zero_fraction) {
        const double drop = (zero_fraction - natural) / (1.0 - natural);
        std::bernoulli_distribution dropout(drop);
        std::mt19937_64 mask(plngm::detail::derive_seed(seed, 2));
        for (Eigen::Index k = 0; k < data.values.size(); ++k) {
            if (dropout(mask)) data.values.data()[k] = 0;
        }
    }
    // Keep every column informative.
    for (Eigen::Index i = 0; i < p; ++i) {
        if ((data.values.col(i).array() == 0).all()) data.values(0, i) = 1;
    }
    return data;
}

/// Fresh empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    const auto dir = std::filesystem::temp_directory_path() / ("plngm_" + tag + "_" + std::to_string(rng() % 1000000007));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct GridMoments {
    double mean;
    double variance;
};

/**
 * Brute-force posterior mean / variance of the latent coordinate: trapezoid
 * rule on `points` equally spaced nodes over the 10-sd interval, log weights
 * shifted by their maximum. Written independently of the library code.
 */
inline GridMoments dense_grid_posterior(std::int64_t y, double beta, double sigma2, int points = 1000000) {
    const double sd = std::sqrt(sigma2);
    const double ly = std::log(static_cast<double>(std::max<std::int64_t>(y, 1)));
    const double a = std::min(ly, beta) - 10.0 * sd;
    const double b = std::max(ly, beta) + 10.0 * sd;
    const double h = (b - a) / (points - 1);
    std::vector<double> logw(static_cast<std::size_t>(points));
    double top = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < points; ++k) {
        const double z = a + h * k;
        logw[static_cast<std::size_t>(k)] = -std::exp(z) + static_cast<double>(y) * z - (z - beta) * (z - beta) / (2.0 * sigma2);
        top = std::max(top, logw[static_cast<std::size_t>(k)]);
    }
    long double s0 = 0, s1 = 0, s2 = 0;
    for (int k = 0; k < points; ++k) {
        const double z = a + h * k;
        const long double w = std::exp(logw[static_cast<std::size_t>(k)] - top) * ((k == 0 || k == points - 1) ? 0.5 : 1.0);
        s0 += w;
        s1 += w * z;
        s2 += w * z * z;
    }
    const double mean = static_cast<double>(s1 / s0);
    return {mean, static_cast<double>(s2 / s0) - mean * mean};
}

/// Data for the two-variable likelihood experiments.
inline CountMatrix two_variable_sample(std::uint64_t seed, Eigen::Index n = 500, double omega12 = 0.4) {
    PlnParams params{Vector::Constant(2, 1.0), Matrix::Identity(2, 2)};
    params.precision(0, 1) = params.precision(1, 0) = omega12;
    return sample_pln(params, n, seed);
}

} // namespace plngm::test
