// plngm command-line front end: fit, bench, transform, init, report.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plngm/plngm.hpp"

namespace fs = std::filesystem;
using plngm::io::json;

namespace {

// String-typed mirrors of enum options; converted after parsing.
struct FitArgs {
    std::string input;
    std::string orientation = "samples-as-rows";
    double min_variance_quantile = 0.75;
    bool depth_adjust = true;
    std::string initializer = "moment";
    double gamma = plngm::kDefaultShrinkage;
    bool eb = false;
    int bootstrap_reps = 200;
    std::int64_t threshold = plngm::kDefaultLargeCountThreshold;
    double rel_tol = plngm::kDefaultRelTol;
    std::string covariance = "empirical";
    int path_length = 50;
    double path_ratio = 0.01;
    double lambda = -1.0;
    double glasso_tol = plngm::kDefaultGlassoTol;
    double ebic_gamma = 0.5;
    int top_k = 10;
    std::string estimate;
    std::string transformed;
};

struct CommonArgs {
    std::string config;
    std::string out = "plngm_out";
    std::uint64_t seed = 1;
    unsigned threads = plngm::detail::default_threads();
    bool no_timings = false;
};

struct BenchArgs {
    std::string network = "hub";
    int replicates = 100;
    long p = 50;
    long n = 150;
    long edges = 204;
    long hubs = 3;
    double diag = -1.0;
    double edge_weight = 0.25;
    double beta_lo = 0.0;
    double beta_hi = 2.0;
    std::string methods = "ORIG,LOG,BOX,ONESTEP,MODSTEP";
    int path_length = 50;
    double path_ratio = 0.01;
    bool fixed_graph = false;
    std::string covariance = "empirical";
};

struct ReportArgs {
    std::string precision;
    int top_k = 10;
};

void add_common(CLI::App* sub, CommonArgs& c) {
    sub->add_option("--config", c.config, "JSON config file; its values win over flags");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "master seed");
    sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--no-timings", c.no_timings, "omit wall-clock timings from manifests");
}

void add_input(CLI::App* sub, FitArgs& a) {
    sub->add_option("--input", a.input, "count matrix (CSV or TSV with header row and name column)");
    sub->add_option("--orientation", a.orientation, "samples-as-rows | variables-as-rows");
}

void add_preprocess(CLI::App* sub, FitArgs& a) {
    sub->add_option("--min-variance-quantile", a.min_variance_quantile, "drop variables below this variance quantile");
    sub->add_flag("--depth-adjust,!--no-depth-adjust", a.depth_adjust, "median-of-ratios depth adjustment");
}

void add_init(CLI::App* sub, FitArgs& a) {
    sub->add_option("--initializer", a.initializer, "moment | mirna");
    sub->add_option("--gamma", a.gamma, "mirna shrinkage weight");
    sub->add_flag("--eb", a.eb, "empirical-Bayes per-variable shrinkage weights (mirna)");
    sub->add_option("--bootstrap-reps", a.bootstrap_reps, "bootstrap replicates for --eb");
}

void add_transform(CLI::App* sub, FitArgs& a) {
    sub->add_option("--threshold", a.threshold, "counts at or above this use the posterior mode");
    sub->add_option("--rel-tol", a.rel_tol, "quadrature relative tolerance");
}

plngm::PipelineConfig to_pipeline(const FitArgs& a, const CommonArgs& c) {
    plngm::PipelineConfig cfg;
    cfg.input = a.input;
    cfg.orientation = plngm::io::orientation_from_string(a.orientation);
    cfg.preprocess.min_variance_quantile = a.min_variance_quantile;
    cfg.preprocess.depth_adjust = a.depth_adjust;
    cfg.initializer = plngm::initializer_from_string(a.initializer);
    cfg.gamma_mode = a.eb ? plngm::GammaMode::empirical_bayes : plngm::GammaMode::fixed;
    cfg.gamma = a.gamma;
    cfg.bootstrap_reps = a.bootstrap_reps;
    cfg.large_count_threshold = a.threshold;
    cfg.rel_tol = a.rel_tol;
    cfg.covariance = plngm::covariance_from_string(a.covariance);
    cfg.path_length = a.path_length;
    cfg.path_ratio = a.path_ratio;
    if (a.lambda >= 0.0) cfg.lambda = a.lambda;
    cfg.glasso_tol = a.glasso_tol;
    cfg.ebic_gamma = a.ebic_gamma;
    cfg.top_k = a.top_k;
    cfg.output_dir = c.out;
    cfg.seed = c.seed;
    cfg.threads = c.threads;
    cfg.record_timings = !c.no_timings;
    if (!a.estimate.empty()) cfg.estimate_checkpoint = fs::path(a.estimate);
    if (!a.transformed.empty()) cfg.transform_checkpoint = fs::path(a.transformed);
    return cfg;
}

std::string json_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

/**
 * Turns a JSON config object into extra arguments for `sub`. Options that
 * were also given on the command line with a different value get a warning;
 * the config value is appended last and so takes effect.
 */
std::vector<std::string> config_arguments(CLI::App* sub, const fs::path& path) {
    const json cfg = plngm::io::read_json(path);
    if (!cfg.is_object()) throw plngm::ConfigError(path.string() + ": config must be a JSON object");
    std::vector<std::string> extra;
    for (const auto& [key, value] : cfg.items()) {
        std::string name = key;
        std::replace(name.begin(), name.end(), '_', '-');
        if (name == "config") throw plngm::ConfigError("config files cannot name another config file");
        CLI::Option* opt = nullptr;
        try {
            opt = sub->get_option("--" + name);
        } catch (const CLI::OptionNotFound&) {
            throw plngm::ConfigError(path.string() + ": unknown setting '" + key + "' for '" + sub->get_name() + "'");
        }
        std::vector<std::string> values;
        if (value.is_array()) {
            for (const auto& v : value) values.push_back(json_scalar(v));
        } else {
            values.push_back(json_scalar(value));
        }
        std::ostringstream joined;
        for (std::size_t i = 0; i < values.size(); ++i) joined << (i ? "," : "") << values[i];
        const std::string text = joined.str();

        if (opt->count() > 0) {
            const auto given = opt->results();
            std::ostringstream was;
            for (std::size_t i = 0; i < given.size(); ++i) was << (i ? "," : "") << given[i];
            if (was.str() != text) {
                std::cerr << "warning: config file sets --" << name << "=" << text << ", overriding command-line value "
                          << was.str() << "\n";
            }
        }
        if (opt->get_expected_max() == 0) {
            extra.push_back("--" + name + "=" + text);  // flag
        } else {
            extra.push_back("--" + name);
            extra.push_back(text);
        }
    }
    return extra;
}

std::vector<plngm::bench::Method> parse_methods(const std::string& list) {
    std::vector<plngm::bench::Method> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(plngm::bench::method_from_string(item));
    }
    if (out.empty()) throw plngm::ConfigError("--methods is empty");
    return out;
}

void log_line(const std::string& s) { std::cerr << s << "\n"; }

int run(int argc, char** argv) {
    CLI::App app{"Poisson log-normal graphical models: one-step transform + graphical lasso"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", plngm::kVersion);

    CommonArgs common;
    FitArgs fit;
    BenchArgs bench;
    ReportArgs report;

    auto* fit_cmd = app.add_subcommand("fit", "ingest, preprocess, initialize, transform, glasso path, eBIC, report");
    add_common(fit_cmd, common);
    add_input(fit_cmd, fit);
    add_preprocess(fit_cmd, fit);
    add_init(fit_cmd, fit);
    add_transform(fit_cmd, fit);
    fit_cmd->add_option("--covariance", fit.covariance, "empirical | em");
    fit_cmd->add_option("--path-length", fit.path_length, "number of lambdas on the path");
    fit_cmd->add_option("--path-ratio", fit.path_ratio, "lambda_min / lambda_max");
    fit_cmd->add_option("--lambda", fit.lambda, "fit a single lambda instead of a path");
    fit_cmd->add_option("--glasso-tol", fit.glasso_tol, "glasso convergence tolerance");
    fit_cmd->add_option("--ebic-gamma", fit.ebic_gamma, "eBIC gamma");
    fit_cmd->add_option("--top-k", fit.top_k, "number of hub variables to report");
    fit_cmd->add_option("--estimate", fit.estimate, "resume from an initial_estimate.json");
    fit_cmd->add_option("--transformed", fit.transformed, "resume from a directory holding transformed.{csv,json}");

    auto* init_cmd = app.add_subcommand("init", "ingest, preprocess and write the initial estimate");
    add_common(init_cmd, common);
    add_input(init_cmd, fit);
    add_preprocess(init_cmd, fit);
    add_init(init_cmd, fit);

    auto* transform_cmd = app.add_subcommand("transform", "posterior-mean transform of a count matrix");
    add_common(transform_cmd, common);
    add_input(transform_cmd, fit);
    add_transform(transform_cmd, fit);
    transform_cmd->add_option("--estimate", fit.estimate, "initial_estimate.json (default: moment estimate)");

    auto* report_cmd = app.add_subcommand("report", "edge list and hub report from a precision matrix");
    add_common(report_cmd, common);
    report_cmd->add_option("--precision", report.precision, "precision.csv written by fit")->required();
    report_cmd->add_option("--top-k", report.top_k, "number of hub variables to report");

    auto* bench_cmd = app.add_subcommand("bench", "simulation study: ROC/AUC of ORIG, LOG, BOX, ONESTEP, MODSTEP");
    add_common(bench_cmd, common);
    bench_cmd->add_option("--network", bench.network, "hub | scale_free | random");
    bench_cmd->add_option("--replicates", bench.replicates, "replicates");
    bench_cmd->add_option("--p", bench.p, "variables");
    bench_cmd->add_option("--n", bench.n, "samples");
    bench_cmd->add_option("--edges", bench.edges, "edge count for random networks");
    bench_cmd->add_option("--hubs", bench.hubs, "hub count for hub networks");
    bench_cmd->add_option("--diag", bench.diag, "precision diagonal (default 1, or 3 for random)");
    bench_cmd->add_option("--edge-weight", bench.edge_weight, "magnitude of off-diagonal precision entries");
    bench_cmd->add_option("--beta-lo", bench.beta_lo, "latent means drawn uniform on [beta-lo, beta-hi]");
    bench_cmd->add_option("--beta-hi", bench.beta_hi, "latent means drawn uniform on [beta-lo, beta-hi]");
    bench_cmd->add_option("--methods", bench.methods, "comma-separated methods");
    bench_cmd->add_option("--path-length", bench.path_length, "number of lambdas on the path");
    bench_cmd->add_option("--path-ratio", bench.path_ratio, "lambda_min / lambda_max");
    bench_cmd->add_flag("--fixed-graph", bench.fixed_graph, "one graph for every replicate");
    bench_cmd->add_option("--covariance", bench.covariance, "empirical | em (ONESTEP / MODSTEP)");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
    try {
        auto first = args;
        app.parse(first);
        CLI::App* sub = app.get_subcommands().front();
        if (!common.config.empty()) {
            auto extra = config_arguments(sub, common.config);
            std::vector<std::string> forward(args.rbegin(), args.rend());
            forward.insert(forward.end(), extra.begin(), extra.end());
            std::vector<std::string> second(forward.rbegin(), forward.rend());
            app.parse(second);
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(plngm::ErrorKind::config);
    }

    const fs::path out = common.out;
    if (fit_cmd->parsed()) {
        const auto cfg = to_pipeline(fit, common);
        const auto report_out = plngm::run_fit(cfg);
        log_line("fit: " + std::to_string(report_out.variable_names.size()) + " variables, " +
                 std::to_string(report_out.edge_count()) + " edges, lambda " +
                 plngm::io::format_double(report_out.estimate.lambda) + " -> " + out.string());
    } else if (init_cmd->parsed()) {
        auto cfg = to_pipeline(fit, common);
        cfg.validate();
        const auto raw = plngm::detail::run_stage("ingest", [&] { return plngm::io::read_counts(cfg.input, cfg.orientation); });
        const auto pre = plngm::detail::run_stage("preprocess", [&] { return plngm::preprocess(raw, cfg.preprocess); });
        const auto init = plngm::detail::run_stage("initialize", [&] { return plngm::initialize(pre.counts, cfg); });
        plngm::detail::run_stage("write", [&] {
            plngm::io::write_counts(out / "preprocessed_counts.csv", pre.counts);
            if (cfg.preprocess.depth_adjust) {
                plngm::io::write_matrix(out / "depth_adjusted.csv", pre.adjusted, pre.counts.sample_ids,
                                        pre.counts.variable_names, "sample");
            }
            plngm::io::write_json(out / "preprocess.json", pre.manifest());
            auto j = plngm::io::estimate_json(init.estimate, pre.counts.variable_names);
            if (init.gamma) j["gamma"] = plngm::io::vector_json(*init.gamma);
            plngm::io::write_json(out / "initial_estimate.json", j);
        });
        for (const auto& f : init.flags) log_line("flag: " + f);
        log_line("init: " + std::to_string(pre.counts.p()) + " variables kept, " + std::to_string(pre.dropped.size()) +
                 " dropped -> " + out.string());
    } else if (transform_cmd->parsed()) {
        if (fit.input.empty()) throw plngm::ConfigError("transform: --input is required");
        const auto orientation = plngm::io::orientation_from_string(fit.orientation);
        const auto data = plngm::detail::run_stage("ingest", [&] { return plngm::io::read_counts(fit.input, orientation); });
        const auto estimate = plngm::detail::run_stage("initialize", [&] {
            return fit.estimate.empty() ? plngm::moment_init(data)
                                        : plngm::io::estimate_from_json(plngm::io::read_json(fit.estimate),
                                                                        data.variable_names);
        });
        plngm::TransformOptions topts;
        topts.large_count_threshold = fit.threshold;
        topts.rel_tol = fit.rel_tol;
        topts.threads = common.threads;
        plngm::detail::run_stage("transform", [&] {
            plngm::io::NamedTransform nt{plngm::transform_matrix(data, estimate, topts), data.variable_names,
                                         data.sample_ids};
            plngm::io::write_transformed(out, "transformed", nt);
            log_line("transform: " + std::to_string(nt.transformed.count(plngm::TransformMethod::mean_quadrature)) +
                     " quadrature cells, " + std::to_string(nt.transformed.count(plngm::TransformMethod::mode_newton)) +
                     " mode cells -> " + out.string());
        });
    } else if (report_cmd->parsed()) {
        plngm::detail::run_stage("report", [&] {
            const auto m = plngm::io::read_matrix(fs::path(report.precision));
            if (m.row_names != m.column_names) throw plngm::InputError("precision matrix must have matching row/column names");
            const plngm::Matrix sym = 0.5 * (m.values + m.values.transpose());
            auto r = plngm::report_from_precision(sym, m.column_names, report.top_k);
            plngm::write_report(out, r);
            log_line("report: " + std::to_string(r.edge_count()) + " edges -> " + out.string());
        });
    } else if (bench_cmd->parsed()) {
        plngm::bench::BenchConfig cfg;
        cfg.kind = plngm::bench::network_from_string(bench.network);
        cfg.replicates = bench.replicates;
        cfg.p = bench.p;
        cfg.n = bench.n;
        cfg.n_edges = bench.edges;
        cfg.n_hubs = bench.hubs;
        if (bench.diag > 0.0) cfg.diag = bench.diag;
        cfg.edge_weight = bench.edge_weight;
        cfg.beta_lo = bench.beta_lo;
        cfg.beta_hi = bench.beta_hi;
        cfg.methods = parse_methods(bench.methods);
        cfg.path_length = bench.path_length;
        cfg.path_ratio = bench.path_ratio;
        cfg.seed = common.seed;
        cfg.fixed_graph = bench.fixed_graph;
        cfg.covariance = plngm::covariance_from_string(bench.covariance);
        cfg.threads = common.threads;
        const auto result = plngm::run_bench(cfg, out, !common.no_timings);
        for (const auto& s : result.summary) {
            log_line(std::string(plngm::bench::to_string(s.method)) + " mean AUC " + plngm::io::format_double(s.mean_auc));
        }
        if (result.failures > 0) log_line("warning: " + std::to_string(result.failures) + " replicate(s) failed");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const plngm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(plngm::ErrorKind::numerical);
    }
}
