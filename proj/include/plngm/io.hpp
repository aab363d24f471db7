#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "plngm/bench.hpp"
#include "plngm/error.hpp"
#include "plngm/exact_oracle.hpp"
#include "plngm/glasso.hpp"
#include "plngm/posterior.hpp"
#include "plngm/types.hpp"

namespace plngm::io {

using json = nlohmann::ordered_json;

enum class Orientation { samples_as_rows, variables_as_rows };

inline std::string_view to_string(Orientation o) {
    return o == Orientation::samples_as_rows ? "samples-as-rows" : "variables-as-rows";
}

inline Orientation orientation_from_string(std::string_view s) {
    if (s == "samples-as-rows" || s == "samples" || s == "rows") return Orientation::samples_as_rows;
    if (s == "variables-as-rows" || s == "variables" || s == "columns") return Orientation::variables_as_rows;
    throw ConfigError("unknown orientation '" + std::string(s) + "'");
}

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Splits one record; double-quoted fields may contain the delimiter ("" is a literal quote).
inline std::vector<std::string> split_record(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && trim(cur).empty()) {
            cur.clear();
            quoted = true;
        } else if (c == delim) {
            out.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.emplace_back(trim(cur));
    return out;
}

inline std::string location(const std::string& source, std::size_t line, std::size_t column) {
    return source + ":" + std::to_string(line) + ":" + std::to_string(column);
}

// Integer count; integral decimals such as "12.0" are accepted.
inline bool parse_count(std::string_view cell, std::int64_t& out) {
    cell = trim(cell);
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    if (ec == std::errc() && ptr == cell.data() + cell.size()) return true;
    double d = 0.0;
    auto [dptr, dec] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
    if (dec != std::errc() || dptr != cell.data() + cell.size()) return false;
    if (!std::isfinite(d) || d != std::floor(d) || std::abs(d) > 9.0e18) return false;
    out = static_cast<std::int64_t>(d);
    return true;
}

inline bool parse_real(std::string_view cell, double& out) {
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return !cell.empty() && ec == std::errc() && ptr == cell.data() + cell.size();
}

struct Table {
    std::vector<std::string> column_names;
    std::vector<std::string> row_names;
    std::vector<std::vector<std::string>> cells;
    std::vector<std::size_t> line_numbers;
    std::size_t header_line = 0;
    char delimiter = ',';
};

inline Table read_table(std::istream& in, const std::string& source) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!have_header) {
            t.delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
            header = split_record(line, t.delimiter);
            t.header_line = lineno;
            have_header = true;
            continue;
        }
        auto fields = split_record(line, t.delimiter);
        if (t.cells.empty()) {
            // Header either has a corner cell (same width as data rows) or omits it.
            if (fields.size() == header.size()) {
                t.column_names.assign(header.begin() + 1, header.end());
            } else if (fields.size() == header.size() + 1) {
                t.column_names = header;
            } else {
                throw InputError(location(source, lineno, 1) + ": row has " + std::to_string(fields.size()) +
                                 " fields, header has " + std::to_string(header.size()));
            }
        }
        if (fields.size() != t.column_names.size() + 1) {
            throw InputError(location(source, lineno, 1) + ": ragged row (" + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(t.column_names.size() + 1) + ")");
        }
        t.row_names.push_back(fields.front());
        t.cells.emplace_back(fields.begin() + 1, fields.end());
        t.line_numbers.push_back(lineno);
    }
    if (!have_header) throw InputError(source + ": empty file");
    if (t.cells.empty()) throw InputError(source + ": no data rows");
    if (t.column_names.empty()) throw InputError(source + ": no data columns");

    auto check_unique = [&](const std::vector<std::string>& names, const char* what, auto where) {
        std::unordered_set<std::string_view> seen;
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i].empty()) throw InputError(where(i) + ": empty " + what + " name");
            if (!seen.insert(names[i]).second) {
                throw InputError(where(i) + ": duplicate " + what + " name '" + names[i] + "'");
            }
        }
    };
    const std::size_t offset = header.size() == t.column_names.size() ? 1 : 2;
    check_unique(t.column_names, "column", [&](std::size_t i) { return location(source, t.header_line, i + offset); });
    check_unique(t.row_names, "row", [&](std::size_t i) { return location(source, t.line_numbers[i], 1); });
    return t;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    return in;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    return out;
}

} // namespace detail

/**
 * @brief Reads a delimited count matrix with a header row and a name column.
 *
 * The delimiter is a tab if the header line contains one, a comma otherwise.
 * The result is always samples x variables.
 */
inline CountMatrix read_counts(std::istream& in, Orientation orientation, const std::string& source = "<input>") {
    const auto t = detail::read_table(in, source);
    const std::size_t rows = t.row_names.size();
    const std::size_t cols = t.column_names.size();
    CountArray values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::int64_t v = 0;
            const auto& cell = t.cells[r][c];
            const auto where = [&] {
                return detail::location(source, t.line_numbers[r], c + 2) + " (row '" + t.row_names[r] +
                       "', column '" + t.column_names[c] + "')";
            };
            if (!detail::parse_count(cell, v)) throw InputError(where() + ": not an integer count: '" + cell + "'");
            if (v < 0) throw InputError(where() + ": negative count " + cell);
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    CountMatrix m;
    if (orientation == Orientation::samples_as_rows) {
        m.values = std::move(values);
        m.sample_ids = t.row_names;
        m.variable_names = t.column_names;
    } else {
        m.values = values.transpose();
        m.sample_ids = t.column_names;
        m.variable_names = t.row_names;
    }
    m.validate();
    return m;
}

inline CountMatrix read_counts(const std::filesystem::path& path, Orientation orientation = Orientation::samples_as_rows) {
    auto in = detail::open_in(path);
    return read_counts(in, orientation, path.string());
}

inline void write_counts(std::ostream& out, const CountMatrix& m, char delim = ',') {
    out << "sample";
    for (const auto& name : m.variable_names) out << delim << name;
    out << '\n';
    for (Eigen::Index j = 0; j < m.n(); ++j) {
        out << m.sample_ids[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < m.p(); ++i) out << delim << m.values(j, i);
        out << '\n';
    }
}

inline void write_counts(const std::filesystem::path& path, const CountMatrix& m, char delim = ',') {
    auto out = detail::open_out(path);
    write_counts(out, m, delim);
}

/// Real matrix with row and column names (transformed values, covariances).
struct LabeledMatrix {
    Matrix values;
    std::vector<std::string> row_names;
    std::vector<std::string> column_names;
};

inline void write_matrix(std::ostream& out, const Matrix& values, const std::vector<std::string>& row_names,
                         const std::vector<std::string>& column_names, const std::string& corner = "") {
    out << corner;
    for (const auto& name : column_names) out << ',' << name;
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        out << row_names[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(r, c));
        out << '\n';
    }
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& values, const std::vector<std::string>& row_names,
                         const std::vector<std::string>& column_names, const std::string& corner = "") {
    auto out = detail::open_out(path);
    write_matrix(out, values, row_names, column_names, corner);
}

inline LabeledMatrix read_matrix(std::istream& in, const std::string& source = "<input>") {
    const auto t = detail::read_table(in, source);
    LabeledMatrix m;
    m.row_names = t.row_names;
    m.column_names = t.column_names;
    m.values.resize(static_cast<Eigen::Index>(t.row_names.size()), static_cast<Eigen::Index>(t.column_names.size()));
    for (std::size_t r = 0; r < t.row_names.size(); ++r) {
        for (std::size_t c = 0; c < t.column_names.size(); ++c) {
            double v = 0.0;
            if (!detail::parse_real(t.cells[r][c], v)) {
                throw InputError(detail::location(source, t.line_numbers[r], c + 2) + ": not a number: '" +
                                 t.cells[r][c] + "'");
            }
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return m;
}

inline LabeledMatrix read_matrix(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    return read_matrix(in, path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    auto out = detail::open_out(path);
    out << j.dump(2) << '\n';
}

inline json read_json(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": invalid JSON: " + e.what());
    }
}

inline std::string read_text(const std::filesystem::path& path) {
    auto in = detail::open_in(path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline json vector_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(row);
    }
    return rows;
}

// ---- initial estimate ----

inline json estimate_json(const InitialEstimate& e, const std::vector<std::string>& names) {
    json flags = json::array();
    for (auto i : e.flagged) flags.push_back(names.at(static_cast<std::size_t>(i)));
    return json{{"origin", std::string(to_string(e.origin))},
                {"variables", names},
                {"beta0", vector_json(e.beta0)},
                {"sigma0_diag", vector_json(e.sigma0_diag)},
                {"flags", flags}};
}

/// Parses an estimate and reorders it to `names` (every name must be present).
inline InitialEstimate estimate_from_json(const json& j, const std::vector<std::string>& names) {
    try {
        const auto vars = j.at("variables").get<std::vector<std::string>>();
        const auto beta = j.at("beta0").get<std::vector<double>>();
        const auto sigma = j.at("sigma0_diag").get<std::vector<double>>();
        if (beta.size() != vars.size() || sigma.size() != vars.size()) {
            throw InputError("initial estimate: beta0/sigma0_diag/variables lengths differ");
        }
        std::unordered_map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < vars.size(); ++i) index.emplace(vars[i], i);
        InitialEstimate e;
        e.origin = init_origin_from_string(j.at("origin").get<std::string>());
        e.beta0.resize(static_cast<Eigen::Index>(names.size()));
        e.sigma0_diag.resize(static_cast<Eigen::Index>(names.size()));
        std::unordered_set<std::string> flagged;
        for (const auto& f : j.value("flags", json::array())) flagged.insert(f.get<std::string>());
        for (std::size_t i = 0; i < names.size(); ++i) {
            auto it = index.find(names[i]);
            if (it == index.end()) throw InputError("initial estimate has no entry for variable '" + names[i] + "'");
            e.beta0[static_cast<Eigen::Index>(i)] = beta[it->second];
            e.sigma0_diag[static_cast<Eigen::Index>(i)] = sigma[it->second];
            if (flagged.count(names[i])) e.flagged.push_back(static_cast<Eigen::Index>(i));
        }
        e.validate();
        return e;
    } catch (const json::exception& ex) {
        throw InputError(std::string("initial estimate: ") + ex.what());
    }
}

// ---- transformed matrix ----

struct NamedTransform {
    TransformedMatrix transformed;
    std::vector<std::string> variable_names;
    std::vector<std::string> sample_ids;
};

inline json transform_sidecar(const NamedTransform& nt) {
    const auto& t = nt.transformed;
    json mode_cells = json::array();
    const auto p = t.values.cols();
    for (std::size_t k = 0; k < t.method_used.size(); ++k) {
        if (t.method_used[k] == TransformMethod::mode_newton) {
            mode_cells.push_back({static_cast<Eigen::Index>(k) / p, static_cast<Eigen::Index>(k) % p});
        }
    }
    return json{{"estimate", estimate_json(t.estimate, nt.variable_names)},
                {"large_count_threshold", t.options.large_count_threshold},
                {"rel_tol", t.options.rel_tol},
                {"method_counts",
                 {{"mean_quadrature", t.count(TransformMethod::mean_quadrature)},
                  {"mode_newton", t.count(TransformMethod::mode_newton)}}},
                {"mode_cells", mode_cells}};
}

/// Writes <stem>.csv (values), <stem>_variance.csv and the <stem>.json sidecar.
inline void write_transformed(const std::filesystem::path& dir, const std::string& stem, const NamedTransform& nt) {
    write_matrix(dir / (stem + ".csv"), nt.transformed.values, nt.sample_ids, nt.variable_names, "sample");
    write_matrix(dir / (stem + "_variance.csv"), nt.transformed.variance, nt.sample_ids, nt.variable_names, "sample");
    write_json(dir / (stem + ".json"), transform_sidecar(nt));
}

inline NamedTransform read_transformed(const std::filesystem::path& dir, const std::string& stem) {
    const auto values = read_matrix(dir / (stem + ".csv"));
    const auto variance = read_matrix(dir / (stem + "_variance.csv"));
    const auto side = read_json(dir / (stem + ".json"));
    if (values.row_names != variance.row_names || values.column_names != variance.column_names) {
        throw InputError("transformed checkpoint: value and variance files disagree on names");
    }
    NamedTransform nt;
    nt.variable_names = values.column_names;
    nt.sample_ids = values.row_names;
    auto& t = nt.transformed;
    t.values = values.values;
    t.variance = variance.values;
    t.estimate = estimate_from_json(side.at("estimate"), nt.variable_names);
    t.options.large_count_threshold = side.at("large_count_threshold").get<std::int64_t>();
    t.options.rel_tol = side.at("rel_tol").get<double>();
    t.method_used.assign(static_cast<std::size_t>(t.values.size()), TransformMethod::mean_quadrature);
    for (const auto& cell : side.at("mode_cells")) {
        const auto r = cell.at(0).get<Eigen::Index>();
        const auto c = cell.at(1).get<Eigen::Index>();
        if (r < 0 || c < 0 || r >= t.values.rows() || c >= t.values.cols()) {
            throw InputError("transformed checkpoint: mode cell out of range");
        }
        t.method_used[static_cast<std::size_t>(r * t.values.cols() + c)] = TransformMethod::mode_newton;
    }
    return nt;
}

// ---- precision estimates ----

/// Support edges sorted by |omega_ik| descending, ties by index.
inline std::vector<Edge> edges_by_weight(const PrecisionEstimate& est) {
    auto edges = est.support;
    std::stable_sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
        const double wa = std::abs(est.omega(a.first, a.second));
        const double wb = std::abs(est.omega(b.first, b.second));
        if (wa != wb) return wa > wb;
        return a < b;
    });
    return edges;
}

inline void write_edge_list(std::ostream& out, const PrecisionEstimate& est, const std::vector<std::string>& names) {
    out << "var_i\tvar_k\tomega_ik\n";
    for (const auto& [i, k] : edges_by_weight(est)) {
        out << names.at(static_cast<std::size_t>(i)) << '\t' << names.at(static_cast<std::size_t>(k)) << '\t'
            << format_double(est.omega(i, k)) << '\n';
    }
}

inline void write_edge_list(const std::filesystem::path& path, const PrecisionEstimate& est,
                            const std::vector<std::string>& names) {
    auto out = detail::open_out(path);
    write_edge_list(out, est, names);
}

inline json estimate_summary_json(const PrecisionEstimate& est, std::optional<double> ebic) {
    json j{{"lambda", est.lambda},
           {"objective", est.objective},
           {"edges", est.edge_count()},
           {"dual_gap", est.dual_gap},
           {"sweeps", est.sweeps}};
    j["ebic"] = ebic ? json(*ebic) : json(nullptr);
    return j;
}

// ---- benchmark ----

inline void write_bench_tidy(std::ostream& out, const bench::BenchResult& r) {
    out << "replicate,network,method,lambda_index,fpr,tpr\n";
    const auto network = bench::to_string(r.config.kind);
    for (const auto& rep : r.replicates) {
        if (!rep.ok) continue;
        for (const auto& run : rep.runs) {
            for (std::size_t k = 0; k < run.roc.points.size(); ++k) {
                out << rep.replicate << ',' << network << ',' << bench::to_string(run.method) << ',' << k << ','
                    << format_double(run.roc.points[k].fpr) << ',' << format_double(run.roc.points[k].tpr) << '\n';
            }
        }
    }
}

inline void write_bench_summary(std::ostream& out, const bench::BenchResult& r) {
    out << "network,method,mean_auc,sd_auc\n";
    const auto network = bench::to_string(r.config.kind);
    for (const auto& s : r.summary) {
        out << network << ',' << bench::to_string(s.method) << ',' << format_double(s.mean_auc) << ','
            << format_double(s.sd_auc) << '\n';
    }
}

// ---- one-step likelihood check ----

inline json em_report_json(const EmIncreaseReport& r) {
    return json{{"ell_start", r.ell_start},
                {"ell_onestep", r.ell_onestep},
                {"lambda", r.lambda},
                {"seed", r.seed},
                {"points_per_axis", r.points_per_axis},
                {"max_resolution_change", r.max_resolution_change},
                {"increased", r.increased},
                {"beta0", vector_json(r.beta0)},
                {"omega_start", matrix_json(r.omega_start)},
                {"omega_onestep", matrix_json(r.omega_onestep)}};
}

} // namespace plngm::io
