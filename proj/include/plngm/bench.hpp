#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <iterator>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "plngm/detail/parallel.hpp"
#include "plngm/error.hpp"
#include "plngm/glasso.hpp"
#include "plngm/pln.hpp"
#include "plngm/posterior.hpp"
#include "plngm/types.hpp"

namespace plngm::bench {

enum class NetworkKind { hub, scale_free, random };

inline std::string_view to_string(NetworkKind k) {
    switch (k) {
    case NetworkKind::hub: return "hub";
    case NetworkKind::scale_free: return "scale_free";
    case NetworkKind::random: return "random";
    }
    return "unknown";
}

inline NetworkKind network_from_string(std::string_view s) {
    if (s == "hub") return NetworkKind::hub;
    if (s == "scale_free" || s == "scale-free" || s == "scalefree") return NetworkKind::scale_free;
    if (s == "random") return NetworkKind::random;
    throw ConfigError("unknown network kind '" + std::string(s) + "'");
}

/// Undirected simple graph on p nodes; edges stored as sorted (i < k) pairs.
struct GraphStructure {
    Eigen::Index p = 0;
    std::vector<Edge> edges;
    NetworkKind kind = NetworkKind::random;

    void validate() const {
        std::set<Edge> seen;
        for (const auto& [i, k] : edges) {
            if (!(i >= 0 && k < p && i < k)) throw InputError("graph edge out of range or not ordered");
            if (!seen.insert({i, k}).second) throw InputError("graph has duplicate edges");
        }
    }

    std::vector<int> degrees() const {
        std::vector<int> d(static_cast<std::size_t>(p), 0);
        for (const auto& [i, k] : edges) {
            ++d[static_cast<std::size_t>(i)];
            ++d[static_cast<std::size_t>(k)];
        }
        return d;
    }
};

namespace detail {
inline void normalize_edges(std::vector<Edge>& edges) {
    for (auto& e : edges) {
        if (e.first > e.second) std::swap(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
}
} // namespace detail

/// Each non-hub node joins exactly one of n_hubs randomly chosen hubs.
inline GraphStructure gen_hub(Eigen::Index p, Eigen::Index n_hubs, std::uint64_t seed) {
    if (!(n_hubs >= 1 && n_hubs < p)) throw InputError("gen_hub: need 1 <= n_hubs < p");
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> nodes(static_cast<std::size_t>(p));
    std::iota(nodes.begin(), nodes.end(), 0);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::uniform_int_distribution<Eigen::Index> pick(0, n_hubs - 1);
    GraphStructure g{p, {}, NetworkKind::hub};
    for (Eigen::Index idx = n_hubs; idx < p; ++idx) {
        g.edges.emplace_back(nodes[static_cast<std::size_t>(pick(rng))], nodes[static_cast<std::size_t>(idx)]);
    }
    detail::normalize_edges(g.edges);
    return g;
}

/// Barabasi-Albert preferential attachment with one edge per new node.
inline GraphStructure gen_scale_free(Eigen::Index p, std::uint64_t seed) {
    if (p < 2) throw InputError("gen_scale_free: need p >= 2");
    std::mt19937_64 rng(seed);
    GraphStructure g{p, {{0, 1}}, NetworkKind::scale_free};
    // Every edge endpoint appears once here, so a uniform draw is degree-proportional.
    std::vector<Eigen::Index> endpoints{0, 1};
    for (Eigen::Index node = 2; node < p; ++node) {
        std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
        const Eigen::Index target = endpoints[pick(rng)];
        g.edges.emplace_back(target, node);
        endpoints.push_back(target);
        endpoints.push_back(node);
    }
    detail::normalize_edges(g.edges);
    return g;
}

/// Erdos-Renyi G(p, M): exactly n_edges distinct pairs, uniformly.
inline GraphStructure gen_random(Eigen::Index p, Eigen::Index n_edges, std::uint64_t seed) {
    const Eigen::Index max_edges = p * (p - 1) / 2;
    if (p < 1 || n_edges < 0 || n_edges > max_edges) {
        throw InputError("gen_random: n_edges must lie in [0, p(p-1)/2]");
    }
    std::vector<Edge> all;
    all.reserve(static_cast<std::size_t>(max_edges));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index k = i + 1; k < p; ++k) all.emplace_back(i, k);
    }
    std::mt19937_64 rng(seed);
    GraphStructure g{p, {}, NetworkKind::random};
    std::sample(all.begin(), all.end(), std::back_inserter(g.edges), n_edges, rng);
    detail::normalize_edges(g.edges);
    return g;
}

inline constexpr double kMinPrecisionEigenvalue = 0.1;

struct PrecisionBuild {
    Matrix omega;
    bool inflated = false;
    double inflation = 0.0;
    double final_diagonal = 0.0;
    double min_eigenvalue = 0.0;  // after inflation
};

/**
 * Omega_ii = diag, Omega_ik = +-edge_weight on edges with seeded random
 * signs. When the smallest eigenvalue is below kMinPrecisionEigenvalue the
 * whole diagonal is raised so that it equals kMinPrecisionEigenvalue.
 */
inline PrecisionBuild graph_to_precision(const GraphStructure& g, double diag, double edge_weight, std::uint64_t seed) {
    if (!(diag > 0.0)) throw InputError("graph_to_precision: diag must be positive");
    g.validate();
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    PrecisionBuild out;
    out.omega = Matrix::Identity(g.p, g.p) * diag;
    for (const auto& [i, k] : g.edges) {
        const double w = coin(rng) ? edge_weight : -edge_weight;
        out.omega(i, k) = w;
        out.omega(k, i) = w;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(out.omega, Eigen::EigenvaluesOnly);
    const double lmin = eig.eigenvalues().minCoeff();
    out.min_eigenvalue = lmin;
    if (lmin < kMinPrecisionEigenvalue) {
        out.inflated = true;
        out.inflation = kMinPrecisionEigenvalue - lmin;
        out.omega.diagonal().array() += out.inflation;
        out.min_eigenvalue = kMinPrecisionEigenvalue;
    }
    out.final_diagonal = diag + out.inflation;
    return out;
}

enum class Method { orig, log, box, onestep, modstep };

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::orig: return "ORIG";
    case Method::log: return "LOG";
    case Method::box: return "BOX";
    case Method::onestep: return "ONESTEP";
    case Method::modstep: return "MODSTEP";
    }
    return "unknown";
}

inline Method method_from_string(std::string_view s) {
    if (s == "ORIG" || s == "orig") return Method::orig;
    if (s == "LOG" || s == "log") return Method::log;
    if (s == "BOX" || s == "box") return Method::box;
    if (s == "ONESTEP" || s == "onestep" || s == "1STEP" || s == "1step") return Method::onestep;
    if (s == "MODSTEP" || s == "modstep") return Method::modstep;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct BoxCoxFit {
    double lambda = 0.0;
    double loglik = 0.0;
    bool fallback = false;
};

/// Box-Cox transform of positive x; log at lambda = 0.
inline double boxcox(double x, double lambda) {
    const double lx = std::log(x);
    return std::abs(lambda) < 1e-12 ? lx : std::expm1(lambda * lx) / lambda;
}

/// -n/2 log(sigma_hat^2(lambda)) + (lambda - 1) sum log x.
inline double boxcox_profile_loglik(std::span<const double> x, double lambda) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0, sumlog = 0.0;
    for (double v : x) {
        mean += boxcox(v, lambda);
        sumlog += std::log(v);
    }
    mean /= n;
    double ss = 0.0;
    for (double v : x) {
        const double d = boxcox(v, lambda) - mean;
        ss += d * d;
    }
    return -0.5 * n * std::log(ss / n) + (lambda - 1.0) * sumlog;
}

/**
 * Golden-section maximization of the Box-Cox profile log-likelihood over
 * [lo, hi]. Non-finite likelihoods (e.g. constant input) fall back to
 * lambda = 0 with `fallback` set.
 */
inline BoxCoxFit fit_boxcox(std::span<const double> x, double lo = -2.0, double hi = 2.0) {
    for (double v : x) {
        if (!(v > 0.0)) throw InputError("fit_boxcox: inputs must be positive");
    }
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    auto f = [&](double l) { return boxcox_profile_loglik(x, l); };
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    if (!std::isfinite(fc) || !std::isfinite(fd)) return {0.0, f(0.0), true};
    for (int it = 0; it < 200 && (b - a) > 1e-10; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if (!std::isfinite(fc) || !std::isfinite(fd)) return {0.0, f(0.0), true};
    }
    BoxCoxFit best{0.5 * (a + b), 0.0, false};
    best.loglik = f(best.lambda);
    // The profile can be multimodal; never report worse than the interval ends.
    for (double edge : {lo, hi}) {
        const double fe = f(edge);
        if (std::isfinite(fe) && fe > best.loglik) best = {edge, fe, false};
    }
    return best;
}

/// Transformed data ready for covariance estimation, plus per-method diagnostics.
struct MethodOutput {
    Matrix values;
    std::optional<TransformedMatrix> transformed;  // ONESTEP / MODSTEP
    std::vector<double> boxcox_lambda;              // BOX
    std::vector<Eigen::Index> boxcox_fallback;      // BOX
};

/**
 * @brief Applies one of the benchmark transformations to a count matrix.
 *
 * ORIG: counts. LOG: log(Y + 1). BOX: per-variable Box-Cox of Y + 1 at the
 * profile-likelihood lambda. ONESTEP: posterior means under moment_init.
 * MODSTEP: posterior means under the true beta and diag(Omega^{-1}).
 */
inline MethodOutput apply_method(const CountMatrix& data, Method method, const PlnParams* truth = nullptr,
                                 const TransformOptions& topts = {}) {
    MethodOutput out;
    switch (method) {
    case Method::orig:
        out.values = data.as_real();
        break;
    case Method::log:
        out.values = (data.as_real().array() + 1.0).log().matrix();
        break;
    case Method::box: {
        const Matrix x = data.as_real().array() + 1.0;
        out.values.resize(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
            const Vector col = x.col(i);
            const auto fit = fit_boxcox(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
            out.boxcox_lambda.push_back(fit.lambda);
            if (fit.fallback) out.boxcox_fallback.push_back(i);
            for (Eigen::Index j = 0; j < x.rows(); ++j) out.values(j, i) = boxcox(x(j, i), fit.lambda);
        }
        break;
    }
    case Method::onestep: {
        out.transformed = transform_matrix(data, moment_init(data), topts);
        out.values = out.transformed->values;
        break;
    }
    case Method::modstep: {
        if (truth == nullptr) throw InputError("apply_method: MODSTEP requires the generating parameters");
        InitialEstimate est;
        est.beta0 = truth->beta;
        est.sigma0_diag = truth->precision.inverse().diagonal();
        est.origin = InitOrigin::external;
        out.transformed = transform_matrix(data, est, topts);
        out.values = out.transformed->values;
        break;
    }
    }
    return out;
}

struct RocPoint {
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // one per path element, lambda descending
    double auc = 0.0;
};

/// Trapezoid area under the FPR-sorted curve completed with (0,0) and (1,1).
inline double roc_auc(std::vector<RocPoint> pts) {
    pts.push_back({0.0, 0.0});
    pts.push_back({1.0, 1.0});
    std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    });
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
    }
    return area;
}

/// ROC point of one estimated edge set against the true edge set.
inline RocPoint roc_point(const std::vector<Edge>& estimated, const GraphStructure& truth) {
    const double total = static_cast<double>(truth.p) * static_cast<double>(truth.p - 1) / 2.0;
    const double positives = static_cast<double>(truth.edges.size());
    std::size_t tp = 0;
    for (const auto& e : estimated) {
        if (std::binary_search(truth.edges.begin(), truth.edges.end(), e)) ++tp;
    }
    const double fp = static_cast<double>(estimated.size() - tp);
    const double negatives = total - positives;
    return {negatives > 0.0 ? fp / negatives : 0.0, static_cast<double>(tp) / positives};
}

inline RocCurve score_roc(const RegularizationPath& path, const GraphStructure& truth) {
    if (truth.edges.empty()) throw InputError("score_roc: true edge set is empty");
    RocCurve curve;
    for (const auto& est : path.estimates) {
        if (est.omega.rows() != truth.p) throw InputError("score_roc: path and truth differ in p");
        auto support = est.support;
        detail::normalize_edges(support);
        curve.points.push_back(roc_point(support, truth));
    }
    curve.auc = roc_auc(curve.points);
    return curve;
}

struct BenchConfig {
    Eigen::Index n = 150;
    Eigen::Index p = 50;
    NetworkKind kind = NetworkKind::hub;
    Eigen::Index n_hubs = 3;
    Eigen::Index n_edges = 204;
    std::optional<double> diag;  // default: 1 for hub / scale-free, 3 for random
    double edge_weight = 0.25;
    double beta_lo = 0.0;
    double beta_hi = 2.0;
    std::vector<Method> methods{Method::orig, Method::log, Method::box, Method::onestep, Method::modstep};
    int replicates = 100;
    int path_length = 50;
    double path_ratio = 0.01;
    std::uint64_t seed = 1;
    bool fixed_graph = false;
    CovarianceMode covariance = CovarianceMode::empirical;
    unsigned threads = plngm::detail::default_threads();

    double diagonal() const { return diag.value_or(kind == NetworkKind::random ? 3.0 : 1.0); }

    void validate() const {
        if (replicates < 1) throw ConfigError("bench: replicates must be >= 1");
        if (methods.empty()) throw ConfigError("bench: methods must be non-empty");
        if (n < 2 || p < 2) throw ConfigError("bench: need n >= 2 and p >= 2");
        if (path_length < 2) throw ConfigError("bench: path length must be >= 2");
    }
};

struct MethodRun {
    Method method;
    RocCurve roc;
    std::vector<double> lambdas;
};

struct ReplicateResult {
    int replicate = 0;
    bool ok = false;
    std::string error;
    GraphStructure graph;
    PrecisionBuild precision;
    std::vector<MethodRun> runs;
    std::vector<double> boxcox_lambda;  // when BOX ran
    std::vector<double> node_variance;  // sample variance of each count column
};

struct MethodSummary {
    Method method;
    double mean_auc = 0.0;
    double sd_auc = 0.0;
    int replicates = 0;
    std::vector<RocPoint> mean_curve;  // pointwise mean by lambda index
};

struct BenchResult {
    BenchConfig config;
    std::vector<ReplicateResult> replicates;
    std::vector<MethodSummary> summary;
    int failures = 0;

    const MethodSummary& summary_for(Method m) const {
        for (const auto& s : summary) {
            if (s.method == m) return s;
        }
        throw InputError("bench: method not in result");
    }
};

inline GraphStructure make_graph(const BenchConfig& cfg, std::uint64_t seed) {
    switch (cfg.kind) {
    case NetworkKind::hub: return gen_hub(cfg.p, cfg.n_hubs, seed);
    case NetworkKind::scale_free: return gen_scale_free(cfg.p, seed);
    case NetworkKind::random: return gen_random(cfg.p, cfg.n_edges, seed);
    }
    throw ConfigError("bench: unknown network kind");
}

/// One replicate: graph, precision, PLN sample, every method's path and ROC.
inline ReplicateResult run_replicate(const BenchConfig& cfg, int r) {
    ReplicateResult rep;
    rep.replicate = r;
    const std::uint64_t rseed = plngm::detail::derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    try {
        const std::uint64_t graph_seed = cfg.fixed_graph ? plngm::detail::derive_seed(cfg.seed, ~0ULL)
                                                         : plngm::detail::derive_seed(rseed, 1);
        rep.graph = make_graph(cfg, graph_seed);
        const std::uint64_t sign_seed = cfg.fixed_graph ? plngm::detail::derive_seed(cfg.seed, ~1ULL)
                                                        : plngm::detail::derive_seed(rseed, 2);
        rep.precision = graph_to_precision(rep.graph, cfg.diagonal(), cfg.edge_weight, sign_seed);

        std::mt19937_64 brng(plngm::detail::derive_seed(rseed, 3));
        std::uniform_real_distribution<double> unif(cfg.beta_lo, cfg.beta_hi);
        PlnParams truth{Vector(cfg.p), rep.precision.omega};
        for (Eigen::Index i = 0; i < cfg.p; ++i) truth.beta[i] = unif(brng);

        const CountMatrix data = sample_pln(truth, cfg.n, plngm::detail::derive_seed(rseed, 4));
        const Matrix counts = data.as_real();
        const Vector mean = counts.colwise().mean().transpose();
        rep.node_variance.resize(static_cast<std::size_t>(cfg.p));
        for (Eigen::Index i = 0; i < cfg.p; ++i) {
            rep.node_variance[static_cast<std::size_t>(i)] =
                (counts.col(i).array() - mean[i]).square().sum() / static_cast<double>(cfg.n - 1);
        }

        TransformOptions topts;
        topts.threads = 1;
        for (Method m : cfg.methods) {
            const auto out = apply_method(data, m, &truth, topts);
            if (m == Method::box) rep.boxcox_lambda = out.boxcox_lambda;
            const CovarianceInput cov = out.transformed ? CovarianceInput{latent_covariance(*out.transformed, cfg.covariance), cfg.n}
                                                        : empirical_covariance(out.values);
            const auto grid = lambda_grid(cov, cfg.path_length, cfg.path_ratio);
            const auto path = fit_path(cov, grid.lambdas);
            if (!path.failures.empty()) {
                throw NumericalError("method " + std::string(to_string(m)) + ": " + path.failures.front().message);
            }
            rep.runs.push_back({m, score_roc(path, rep.graph), path.lambdas});
        }
        rep.ok = true;
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.error = e.what();
        rep.runs.clear();
    }
    return rep;
}

/**
 * @brief Runs the simulation study described by cfg.
 *
 * Replicates run in parallel with seeds derived from cfg.seed; failed
 * replicates are kept in the record, counted, and excluded from summaries.
 */
inline BenchResult run_benchmark(const BenchConfig& cfg) {
    cfg.validate();
    BenchResult result;
    result.config = cfg;
    result.replicates.resize(static_cast<std::size_t>(cfg.replicates));
    plngm::detail::parallel_for(static_cast<std::size_t>(cfg.replicates), cfg.threads, [&](std::size_t r) {
        result.replicates[r] = run_replicate(cfg, static_cast<int>(r));
    });

    for (Method m : cfg.methods) {
        MethodSummary s{m};
        std::vector<double> aucs;
        std::vector<RocPoint> sum;
        std::vector<int> counts;
        for (const auto& rep : result.replicates) {
            if (!rep.ok) continue;
            for (const auto& run : rep.runs) {
                if (run.method != m) continue;
                aucs.push_back(run.roc.auc);
                if (sum.size() < run.roc.points.size()) {
                    sum.resize(run.roc.points.size(), {0.0, 0.0});
                    counts.resize(run.roc.points.size(), 0);
                }
                for (std::size_t k = 0; k < run.roc.points.size(); ++k) {
                    sum[k].fpr += run.roc.points[k].fpr;
                    sum[k].tpr += run.roc.points[k].tpr;
                    ++counts[k];
                }
            }
        }
        s.replicates = static_cast<int>(aucs.size());
        if (!aucs.empty()) {
            s.mean_auc = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
            double ss = 0.0;
            for (double a : aucs) ss += (a - s.mean_auc) * (a - s.mean_auc);
            s.sd_auc = aucs.size() > 1 ? std::sqrt(ss / static_cast<double>(aucs.size() - 1)) : 0.0;
        }
        for (std::size_t k = 0; k < sum.size(); ++k) {
            s.mean_curve.push_back({sum[k].fpr / counts[k], sum[k].tpr / counts[k]});
        }
        result.summary.push_back(std::move(s));
    }
    result.failures = static_cast<int>(
        std::count_if(result.replicates.begin(), result.replicates.end(), [](const auto& r) { return !r.ok; }));
    return result;
}

/// Pearson correlation; NaN when either input is constant.
inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace plngm::bench
