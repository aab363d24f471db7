#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "plngm/bench.hpp"
#include "plngm/error.hpp"
#include "plngm/glasso.hpp"
#include "plngm/io.hpp"
#include "plngm/pln.hpp"
#include "plngm/posterior.hpp"
#include "plngm/types.hpp"

namespace plngm {

inline constexpr const char* kVersion = "0.1.0";

struct PreprocessConfig {
    double min_variance_quantile = 0.75;
    bool depth_adjust = true;
};

enum class Initializer { moment, mirna };
enum class GammaMode { fixed, empirical_bayes };

inline std::string_view to_string(Initializer i) { return i == Initializer::moment ? "moment" : "mirna"; }

inline Initializer initializer_from_string(std::string_view s) {
    if (s == "moment") return Initializer::moment;
    if (s == "mirna") return Initializer::mirna;
    throw ConfigError("unknown initializer '" + std::string(s) + "'");
}

inline std::string_view to_string(CovarianceMode m) { return m == CovarianceMode::empirical ? "empirical" : "em"; }

inline CovarianceMode covariance_from_string(std::string_view s) {
    if (s == "empirical") return CovarianceMode::empirical;
    if (s == "em" || s == "em_expected") return CovarianceMode::em_expected;
    throw ConfigError("unknown covariance mode '" + std::string(s) + "'");
}

struct PipelineConfig {
    std::filesystem::path input;
    io::Orientation orientation = io::Orientation::samples_as_rows;
    PreprocessConfig preprocess;
    Initializer initializer = Initializer::moment;
    GammaMode gamma_mode = GammaMode::fixed;
    double gamma = kDefaultShrinkage;
    int bootstrap_reps = 200;
    std::int64_t large_count_threshold = kDefaultLargeCountThreshold;
    double rel_tol = kDefaultRelTol;
    CovarianceMode covariance = CovarianceMode::empirical;
    int path_length = 50;
    double path_ratio = 0.01;
    std::optional<double> lambda;  // single fixed penalty instead of a path
    double glasso_tol = kDefaultGlassoTol;
    double ebic_gamma = 0.5;
    int top_k = 10;
    std::filesystem::path output_dir = "plngm_out";
    std::uint64_t seed = 1;
    unsigned threads = detail::default_threads();
    bool record_timings = true;
    // Checkpoints: resume from a saved initial estimate or transformed matrix.
    std::optional<std::filesystem::path> estimate_checkpoint;
    std::optional<std::filesystem::path> transform_checkpoint;  // directory holding transformed.{csv,json}

    void validate() const {
        if (!(preprocess.min_variance_quantile >= 0.0 && preprocess.min_variance_quantile < 1.0)) {
            throw ConfigError("min_variance_quantile must lie in [0, 1)");
        }
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
        if (bootstrap_reps < 50) throw ConfigError("bootstrap_reps must be >= 50");
        if (large_count_threshold < 0) throw ConfigError("large_count_threshold must be non-negative");
        if (!(rel_tol > 0.0 && rel_tol <= 1e-2)) throw ConfigError("rel_tol must lie in (0, 1e-2]");
        if (path_length < 2) throw ConfigError("path_length must be >= 2");
        if (!(path_ratio > 0.0 && path_ratio < 1.0)) throw ConfigError("path_ratio must lie in (0, 1)");
        if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) throw ConfigError("lambda must be >= 0");
        if (!(glasso_tol > 0.0)) throw ConfigError("glasso tol must be positive");
        if (!(ebic_gamma >= 0.0 && ebic_gamma <= 1.0)) throw ConfigError("ebic_gamma must lie in [0, 1]");
        if (top_k < 0) throw ConfigError("top_k must be non-negative");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        if (input.empty() && !transform_checkpoint) throw ConfigError("no input file given");
    }

    io::json to_json() const {
        io::json j{{"input", input.string()},
                   {"orientation", std::string(io::to_string(orientation))},
                   {"min_variance_quantile", preprocess.min_variance_quantile},
                   {"depth_adjust", preprocess.depth_adjust},
                   {"initializer", std::string(to_string(initializer))},
                   {"gamma_mode", gamma_mode == GammaMode::fixed ? "fixed" : "empirical_bayes"},
                   {"gamma", gamma},
                   {"bootstrap_reps", bootstrap_reps},
                   {"large_count_threshold", large_count_threshold},
                   {"rel_tol", rel_tol},
                   {"covariance", std::string(to_string(covariance))},
                   {"path_length", path_length},
                   {"path_ratio", path_ratio},
                   {"glasso_tol", glasso_tol},
                   {"ebic_gamma", ebic_gamma},
                   {"top_k", top_k},
                   {"output_dir", output_dir.string()},
                   {"seed", seed}};
        j["lambda"] = lambda ? io::json(*lambda) : io::json(nullptr);
        j["estimate_checkpoint"] = estimate_checkpoint ? io::json(estimate_checkpoint->string()) : io::json(nullptr);
        j["transform_checkpoint"] = transform_checkpoint ? io::json(transform_checkpoint->string()) : io::json(nullptr);
        return j;
    }
};

/// FNV-1a; stable across platforms, used only to tag runs.
inline std::string config_hash(const io::json& j) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : j.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

// ---- preprocessing ----

struct PreprocessResult {
    CountMatrix counts;             // filtered and (optionally) depth-adjusted, rounded
    Matrix adjusted;                // pre-rounding depth-adjusted values (empty if not adjusted)
    Vector variances;               // sample variance of every input variable
    double variance_cutoff = 0.0;
    std::vector<std::string> dropped;
    Vector size_factors;            // one per sample; ones when not adjusted
    bool size_factor_fallback = false;
    std::vector<std::string> zero_depth_samples;

    io::json manifest() const {
        return io::json{{"variance_cutoff", variance_cutoff},
                        {"kept", counts.variable_names},
                        {"dropped", dropped},
                        {"sample_ids", counts.sample_ids},
                        {"depth_adjusted", adjusted.size() > 0},
                        {"size_factors", io::vector_json(size_factors)},
                        {"size_factor_method", adjusted.size() == 0 ? "none"
                                               : size_factor_fallback ? "total_count"
                                                                      : "median_of_ratios"},
                        {"size_factor_fallback", size_factor_fallback},
                        {"zero_depth_samples", zero_depth_samples},
                        {"note", "variance quantile and depth method are configuration choices"}};
    }
};

/// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw InputError("quantile of an empty set");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/**
 * Median-of-ratios size factors over variables with all-positive counts.
 * Returns nullopt when no such variable exists.
 */
inline std::optional<Vector> median_of_ratios(const CountArray& y) {
    std::vector<Eigen::Index> usable;
    for (Eigen::Index i = 0; i < y.cols(); ++i) {
        if ((y.col(i).array() > 0).all()) usable.push_back(i);
    }
    if (usable.empty()) return std::nullopt;
    std::vector<double> log_geo(usable.size());
    for (std::size_t u = 0; u < usable.size(); ++u) {
        log_geo[u] = y.col(usable[u]).cast<double>().array().log().mean();
    }
    Vector sf(y.rows());
    std::vector<double> ratios(usable.size());
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
        for (std::size_t u = 0; u < usable.size(); ++u) {
            ratios[u] = std::exp(std::log(static_cast<double>(y(j, usable[u]))) - log_geo[u]);
        }
        sf[j] = quantile(ratios, 0.5);
    }
    return sf;
}

/**
 * @brief Drops low-variance variables, then optionally adjusts for depth.
 *
 * Variables whose sample variance is below the min_variance_quantile
 * quantile are dropped. Depth adjustment divides each sample by its size
 * factor and rounds to the nearest integer; the unrounded values are kept.
 */
inline PreprocessResult preprocess(const CountMatrix& data, const PreprocessConfig& cfg) {
    data.validate();
    if (!(cfg.min_variance_quantile >= 0.0 && cfg.min_variance_quantile < 1.0)) {
        throw ConfigError("min_variance_quantile must lie in [0, 1)");
    }
    PreprocessResult out;
    const Matrix x = data.as_real();
    const Eigen::Index n = data.n();
    out.variances.resize(data.p());
    for (Eigen::Index i = 0; i < data.p(); ++i) {
        const double m = x.col(i).mean();
        out.variances[i] = (x.col(i).array() - m).square().sum() / static_cast<double>(n - 1);
    }
    out.variance_cutoff =
        quantile(std::vector<double>(out.variances.data(), out.variances.data() + out.variances.size()),
                 cfg.min_variance_quantile);

    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < data.p(); ++i) {
        if (out.variances[i] < out.variance_cutoff) {
            out.dropped.push_back(data.variable_names[static_cast<std::size_t>(i)]);
        } else {
            keep.push_back(i);
        }
    }
    if (keep.empty()) throw InputError("preprocess: every variable was dropped by the variance filter");

    CountMatrix kept;
    kept.sample_ids = data.sample_ids;
    kept.values.resize(n, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        kept.values.col(static_cast<Eigen::Index>(k)) = data.values.col(keep[k]);
        kept.variable_names.push_back(data.variable_names[static_cast<std::size_t>(keep[k])]);
    }

    out.size_factors = Vector::Ones(n);
    if (cfg.depth_adjust) {
        if (auto sf = median_of_ratios(kept.values)) {
            out.size_factors = *sf;
        } else {
            out.size_factor_fallback = true;
            const Vector totals = kept.values.cast<double>().rowwise().sum();
            double log_sum = 0.0;
            int positive = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (totals[j] > 0.0) {
                    log_sum += std::log(totals[j]);
                    ++positive;
                }
            }
            if (positive == 0) throw InputError("preprocess: every sample has zero total count");
            const double geo = std::exp(log_sum / positive);
            for (Eigen::Index j = 0; j < n; ++j) out.size_factors[j] = totals[j] > 0.0 ? totals[j] / geo : 1.0;
        }
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(out.size_factors[j] > 0.0)) {
                out.size_factors[j] = 1.0;
                out.zero_depth_samples.push_back(data.sample_ids[static_cast<std::size_t>(j)]);
            }
        }
        out.adjusted = kept.as_real().array().colwise() / out.size_factors.array();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < kept.p(); ++i) kept.values(j, i) = std::llround(out.adjusted(j, i));
        }
    }
    out.counts = std::move(kept);
    out.counts.validate();
    return out;
}

// ---- initialization ----

struct InitResult {
    InitialEstimate estimate;
    std::optional<Vector> gamma;  // per-variable shrinkage weights (mirna)
    std::vector<std::string> flags;
};

inline InitResult initialize(const CountMatrix& data, const PipelineConfig& cfg) {
    InitResult r;
    if (cfg.initializer == Initializer::moment) {
        r.estimate = moment_init(data);
    } else {
        const auto trend = fit_trend(data);
        Vector g;
        if (cfg.gamma_mode == GammaMode::fixed) {
            g = Vector::Constant(data.p(), cfg.gamma);
        } else {
            const auto eb = eb_gamma(data, trend, cfg.bootstrap_reps, cfg.seed);
            g = eb.gamma;
            for (auto i : eb.flagged) {
                r.flags.push_back("eb_gamma_default:" + data.variable_names[static_cast<std::size_t>(i)]);
            }
        }
        r.estimate = mirna_shrink_init(data, trend, std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
        r.gamma = g;
    }
    for (auto i : r.estimate.flagged) {
        r.flags.push_back("variance_clamped:" + data.variable_names[static_cast<std::size_t>(i)]);
    }
    return r;
}

// ---- report ----

struct NodeDegree {
    std::string name;
    Eigen::Index degree = 0;
};

struct NetworkReport {
    std::vector<std::string> variable_names;
    PrecisionEstimate estimate;
    std::vector<Eigen::Index> degrees;
    std::vector<NodeDegree> top;
    io::json metadata = io::json::object();

    std::size_t edge_count() const { return estimate.support.size(); }
};

inline NetworkReport make_network_report(const PrecisionEstimate& est, const std::vector<std::string>& names,
                                         int top_k) {
    const auto p = static_cast<std::size_t>(est.omega.rows());
    if (names.size() != p) throw InputError("report: name count does not match precision dimension");
    NetworkReport r;
    r.variable_names = names;
    r.estimate = est;
    r.degrees.assign(p, 0);
    for (const auto& [i, k] : est.support) {
        ++r.degrees[static_cast<std::size_t>(i)];
        ++r.degrees[static_cast<std::size_t>(k)];
    }
    std::vector<NodeDegree> all;
    for (std::size_t i = 0; i < p; ++i) all.push_back({names[i], r.degrees[i]});
    std::sort(all.begin(), all.end(), [](const NodeDegree& a, const NodeDegree& b) {
        if (a.degree != b.degree) return a.degree > b.degree;
        return a.name < b.name;
    });
    all.resize(std::min(all.size(), static_cast<std::size_t>(top_k)));
    r.top = std::move(all);
    return r;
}

/// Report from a bare precision matrix (support recomputed from the entries).
inline NetworkReport report_from_precision(const Matrix& omega, const std::vector<std::string>& names, int top_k,
                                           double lambda = std::nan("")) {
    PrecisionEstimate est;
    est.omega = omega;
    est.lambda = lambda;
    est.support = extract_support(omega);
    return make_network_report(est, names, top_k);
}

inline io::json report_json(const NetworkReport& r) {
    io::json degrees = io::json::object();
    for (std::size_t i = 0; i < r.variable_names.size(); ++i) degrees[r.variable_names[i]] = r.degrees[i];
    io::json top = io::json::array();
    for (const auto& t : r.top) top.push_back({{"name", t.name}, {"degree", t.degree}});
    io::json edges = io::json::array();
    for (const auto& [i, k] : io::edges_by_weight(r.estimate)) {
        edges.push_back({r.variable_names[static_cast<std::size_t>(i)], r.variable_names[static_cast<std::size_t>(k)],
                         r.estimate.omega(i, k)});
    }
    io::json j{{"lambda", std::isnan(r.estimate.lambda) ? io::json(nullptr) : io::json(r.estimate.lambda)},
               {"edge_count", r.edge_count()},
               {"node_count", r.variable_names.size()},
               {"top", top},
               {"degrees", degrees},
               {"edges", edges},
               {"metadata", r.metadata}};
    return j;
}

inline void write_report(const std::filesystem::path& dir, const NetworkReport& r) {
    io::write_edge_list(dir / "edges.tsv", r.estimate, r.variable_names);
    io::write_json(dir / "network_report.json", report_json(r));
}

namespace detail {

template <class F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage '") + name + "': " + e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        throw Error(ErrorKind::input, std::string("stage '") + name + "': " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::input, std::string("stage '") + name + "': " + e.what());
    }
}

class Stopwatch {
public:
    explicit Stopwatch(io::json& sink) : sink_(sink) {}
    template <class F>
    auto time(const char* name, F&& f) -> decltype(f()) {
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(f())>) {
            run_stage(name, std::forward<F>(f));
            record(name, t0);
        } else {
            auto result = run_stage(name, std::forward<F>(f));
            record(name, t0);
            return result;
        }
    }

private:
    void record(const char* name, std::chrono::steady_clock::time_point t0) {
        sink_[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    io::json& sink_;
};

inline io::json versions_json() {
    return io::json{{"plngm", kVersion},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}};
}

} // namespace detail

/// Everything run_fit produced, for callers that want more than the report.
struct FitOutcome {
    NetworkReport report;
    RegularizationPath path;
    EbicSelection selection;
    CovarianceInput covariance;
    io::NamedTransform transformed;
    std::vector<std::string> flags;
};

/**
 * @brief Full fit: ingest, preprocess, initialize, transform, covariance,
 * glasso path, eBIC selection, report.
 *
 * Every intermediate artifact is written to cfg.output_dir. A transform
 * checkpoint skips the first four stages; an estimate checkpoint skips
 * initialization.
 */
inline FitOutcome run_fit_detailed(const PipelineConfig& cfg) {
    detail::run_stage("config", [&] { cfg.validate(); });
    const auto& dir = cfg.output_dir;
    detail::run_stage("config", [&] { std::filesystem::create_directories(dir); });
    io::json timings = io::json::object();
    detail::Stopwatch sw(timings);
    FitOutcome out;

    if (cfg.transform_checkpoint) {
        out.transformed = sw.time("transform", [&] { return io::read_transformed(*cfg.transform_checkpoint, "transformed"); });
    } else {
        const auto raw = sw.time("ingest", [&] { return io::read_counts(cfg.input, cfg.orientation); });
        const auto pre = sw.time("preprocess", [&] {
            auto r = preprocess(raw, cfg.preprocess);
            io::write_counts(dir / "preprocessed_counts.csv", r.counts);
            if (cfg.preprocess.depth_adjust) {
                io::write_matrix(dir / "depth_adjusted.csv", r.adjusted, r.counts.sample_ids, r.counts.variable_names,
                                 "sample");
            }
            io::write_json(dir / "preprocess.json", r.manifest());
            return r;
        });
        if (pre.size_factor_fallback) out.flags.push_back("size_factor_fallback:total_count");
        for (const auto& s : pre.zero_depth_samples) out.flags.push_back("zero_depth_sample:" + s);

        const auto estimate = sw.time("initialize", [&] {
            InitResult init;
            if (cfg.estimate_checkpoint) {
                init.estimate = io::estimate_from_json(io::read_json(*cfg.estimate_checkpoint), pre.counts.variable_names);
            } else {
                init = initialize(pre.counts, cfg);
            }
            auto j = io::estimate_json(init.estimate, pre.counts.variable_names);
            if (init.gamma) j["gamma"] = io::vector_json(*init.gamma);
            io::write_json(dir / "initial_estimate.json", j);
            out.flags.insert(out.flags.end(), init.flags.begin(), init.flags.end());
            return init.estimate;
        });

        out.transformed = sw.time("transform", [&] {
            TransformOptions topts;
            topts.large_count_threshold = cfg.large_count_threshold;
            topts.rel_tol = cfg.rel_tol;
            topts.threads = cfg.threads;
            io::NamedTransform nt{transform_matrix(pre.counts, estimate, topts), pre.counts.variable_names,
                                  pre.counts.sample_ids};
            io::write_transformed(dir, "transformed", nt);
            return nt;
        });
    }
    const auto& names = out.transformed.variable_names;

    out.covariance = sw.time("covariance", [&] {
        CovarianceInput cov{latent_covariance(out.transformed.transformed, cfg.covariance),
                            out.transformed.transformed.values.rows()};
        cov.validate();
        io::write_matrix(dir / "covariance.csv", cov.s, names, names, "variable");
        return cov;
    });

    out.path = sw.time("glasso", [&] {
        std::vector<double> lambdas;
        if (cfg.lambda) {
            lambdas = {*cfg.lambda};
        } else {
            const auto grid = lambda_grid(out.covariance, cfg.path_length, cfg.path_ratio);
            if (grid.degenerate) out.flags.push_back("degenerate_lambda_grid");
            lambdas = grid.lambdas;
        }
        GlassoOptions gopts;
        gopts.tol = cfg.glasso_tol;
        auto path = fit_path(out.covariance, lambdas, gopts);
        if (path.estimates.empty()) {
            throw NumericalError("every lambda on the path failed; first: " + path.failures.front().message);
        }
        return path;
    });
    for (const auto& f : out.path.failures) out.flags.push_back("path_failure:" + io::format_double(f.lambda));

    out.selection = sw.time("select", [&] {
        auto sel = ebic_select(out.path, out.covariance, cfg.ebic_gamma);
        auto csv = io::detail::open_out(dir / "path.csv");
        csv << "lambda_index,lambda,edges,objective,ebic\n";
        for (std::size_t k = 0; k < out.path.estimates.size(); ++k) {
            const auto& e = out.path.estimates[k];
            csv << k << ',' << io::format_double(out.path.lambdas[k]) << ',' << e.edge_count() << ','
                << io::format_double(e.objective) << ',' << io::format_double(out.path.ebic_scores[k]) << '\n';
        }
        return sel;
    });

    const auto& chosen = out.path.estimates[out.selection.index];
    out.report = sw.time("report", [&] {
        auto r = make_network_report(chosen, names, cfg.top_k);
        io::write_matrix(dir / "precision.csv", chosen.omega, names, names, "variable");
        io::write_json(dir / "selected.json", io::estimate_summary_json(chosen, out.selection.score));
        return r;
    });

    const auto config = cfg.to_json();
    out.report.metadata = io::json{{"config_hash", config_hash(config)}, {"seed", cfg.seed}, {"flags", out.flags}};
    if (cfg.record_timings) out.report.metadata["timings"] = timings;
    detail::run_stage("report", [&] { write_report(dir, out.report); });

    io::json manifest{{"command", "fit"},
                      {"config", config},
                      {"config_hash", config_hash(config)},
                      {"versions", detail::versions_json()},
                      {"seed", cfg.seed},
                      {"resumed_from", cfg.transform_checkpoint ? "transform"
                                       : cfg.estimate_checkpoint ? "initialize"
                                                                 : "start"},
                      {"flags", out.flags},
                      {"selected_lambda", out.selection.lambda},
                      {"edges", out.report.edge_count()}};
    if (cfg.record_timings) manifest["timings"] = timings;
    detail::run_stage("report", [&] { io::write_json(dir / "run_manifest.json", manifest); });
    return out;
}

inline NetworkReport run_fit(const PipelineConfig& cfg) { return run_fit_detailed(cfg).report; }

/// Runs the simulation study and writes bench_tidy.csv / bench_summary.csv.
inline bench::BenchResult run_bench(const bench::BenchConfig& cfg, const std::filesystem::path& dir,
                                    bool record_timings = true) {
    detail::run_stage("config", [&] { cfg.validate(); });
    const auto t0 = std::chrono::steady_clock::now();
    auto result = detail::run_stage("bench", [&] { return bench::run_benchmark(cfg); });
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::run_stage("write", [&] {
        {
            auto out = io::detail::open_out(dir / "bench_tidy.csv");
            io::write_bench_tidy(out, result);
        }
        {
            auto out = io::detail::open_out(dir / "bench_summary.csv");
            io::write_bench_summary(out, result);
        }
        std::vector<std::string> methods;
        for (auto m : cfg.methods) methods.emplace_back(bench::to_string(m));
        io::json failures = io::json::array();
        for (const auto& r : result.replicates) {
            if (!r.ok) failures.push_back({{"replicate", r.replicate}, {"error", r.error}});
        }
        io::json manifest{{"command", "bench"},
                          {"config",
                           {{"network", std::string(bench::to_string(cfg.kind))},
                            {"n", cfg.n},
                            {"p", cfg.p},
                            {"hubs", cfg.n_hubs},
                            {"edges", cfg.n_edges},
                            {"diagonal", cfg.diagonal()},
                            {"edge_weight", cfg.edge_weight},
                            {"beta_lo", cfg.beta_lo},
                            {"beta_hi", cfg.beta_hi},
                            {"methods", methods},
                            {"replicates", cfg.replicates},
                            {"path_length", cfg.path_length},
                            {"path_ratio", cfg.path_ratio},
                            {"seed", cfg.seed},
                            {"fixed_graph", cfg.fixed_graph},
                            {"covariance", std::string(to_string(cfg.covariance))}}},
                          {"versions", detail::versions_json()},
                          {"failures", failures}};
        if (record_timings) manifest["timings"] = {{"bench", seconds}};
        io::write_json(dir / "bench_manifest.json", manifest);
    });
    return result;
}

} // namespace plngm
