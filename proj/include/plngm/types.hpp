#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "plngm/error.hpp"

namespace plngm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CountArray = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/**
 * @brief n x p matrix of non-negative integer counts.
 *
 * Rows are samples, columns are variables. Both axes carry names; variable
 * names must be unique because downstream edge lists are keyed on them.
 */
struct CountMatrix {
    CountArray values;
    std::vector<std::string> variable_names;
    std::vector<std::string> sample_ids;

    Eigen::Index n() const { return values.rows(); }
    Eigen::Index p() const { return values.cols(); }

    /// Counts as doubles, same layout.
    Matrix as_real() const { return values.cast<double>(); }

    /// Throws InputError when an invariant does not hold.
    void validate() const {
        if (values.rows() < 2) {
            throw InputError("count matrix needs at least 2 samples, got " + std::to_string(values.rows()));
        }
        if (values.cols() < 1) {
            throw InputError("count matrix needs at least 1 variable");
        }
        if (static_cast<Eigen::Index>(variable_names.size()) != values.cols()) {
            throw InputError("variable_names size does not match column count");
        }
        if (static_cast<Eigen::Index>(sample_ids.size()) != values.rows()) {
            throw InputError("sample_ids size does not match row count");
        }
        for (Eigen::Index j = 0; j < values.rows(); ++j) {
            for (Eigen::Index i = 0; i < values.cols(); ++i) {
                if (values(j, i) < 0) {
                    throw InputError("negative count at sample '" + sample_ids[j] + "', variable '" +
                                     variable_names[i] + "'");
                }
            }
        }
        std::unordered_set<std::string_view> seen;
        for (const auto& name : variable_names) {
            if (!seen.insert(name).second) {
                throw InputError("duplicate variable name '" + name + "'");
            }
        }
    }

    /// Builds a matrix with generated names ("V1".., "S1"..).
    static CountMatrix from_values(CountArray v) {
        CountMatrix m;
        m.values = std::move(v);
        m.variable_names.reserve(m.values.cols());
        for (Eigen::Index i = 0; i < m.values.cols(); ++i) {
            m.variable_names.push_back("V" + std::to_string(i + 1));
        }
        m.sample_ids.reserve(m.values.rows());
        for (Eigen::Index j = 0; j < m.values.rows(); ++j) {
            m.sample_ids.push_back("S" + std::to_string(j + 1));
        }
        return m;
    }
};

/// Latent Gaussian mean and precision of the Poisson log-normal model.
struct PlnParams {
    Vector beta;
    Matrix precision;

    Eigen::Index p() const { return beta.size(); }

    void validate() const {
        if (precision.rows() != beta.size() || precision.cols() != beta.size()) {
            throw InputError("precision must be p x p with p = beta.size()");
        }
        if ((precision - precision.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
            throw InputError("precision is not symmetric");
        }
        Eigen::LLT<Matrix> llt(precision);
        if (llt.info() != Eigen::Success) {
            throw InputError("precision is not positive-definite");
        }
    }
};

enum class InitOrigin { moment, mirna_shrunk, external };

inline std::string_view to_string(InitOrigin o) {
    switch (o) {
    case InitOrigin::moment: return "moment";
    case InitOrigin::mirna_shrunk: return "mirna_shrunk";
    case InitOrigin::external: return "external";
    }
    return "unknown";
}

inline InitOrigin init_origin_from_string(std::string_view s) {
    if (s == "moment") return InitOrigin::moment;
    if (s == "mirna_shrunk") return InitOrigin::mirna_shrunk;
    if (s == "external") return InitOrigin::external;
    throw InputError("unknown initial-estimate origin '" + std::string(s) + "'");
}

/**
 * @brief Per-variable latent mean and diagonal latent variance.
 *
 * The starting precision is diag(1 / sigma0_diag). `flagged` lists the
 * variables whose variance was clamped (underdispersed input).
 */
struct InitialEstimate {
    Vector beta0;
    Vector sigma0_diag;
    InitOrigin origin = InitOrigin::external;
    std::vector<Eigen::Index> flagged;

    Eigen::Index p() const { return beta0.size(); }

    Matrix omega0() const { return sigma0_diag.cwiseInverse().asDiagonal(); }

    void validate() const {
        if (beta0.size() != sigma0_diag.size()) {
            throw InputError("beta0 and sigma0_diag differ in length");
        }
        for (Eigen::Index i = 0; i < sigma0_diag.size(); ++i) {
            if (!(sigma0_diag[i] > 0.0) || !std::isfinite(sigma0_diag[i]) || !std::isfinite(beta0[i])) {
                throw InputError("initial estimate for variable " + std::to_string(i) +
                                 " is not finite with positive variance");
            }
        }
    }
};

} // namespace plngm
