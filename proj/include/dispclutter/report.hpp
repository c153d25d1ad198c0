/*
 * Copyright 2026 The dispclutter Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Config loading, JSON reports, text/CSV tables and exit codes for the CLI.

#ifndef DISPCLUTTER_REPORT_HPP
#define DISPCLUTTER_REPORT_HPP

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dispclutter/config.hpp"
#include "dispclutter/experiment.hpp"
#include "dispclutter/rng.hpp"

namespace dispclutter {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitPass = 0;
inline constexpr int kExitThresholdFailure = 1;
inline constexpr int kExitExecutionError = 2;

// ---------------------------------------------------------------- config

namespace detail {

inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace detail

/// Parses config text; empty text means all defaults.
inline Json parse_config_text(const std::string& text, const std::string& origin = "config") {
    if (detail::blank(text)) return Json::object();
    try {
        return Json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann reports the byte just past the offending token.
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        throw Error(ErrorKind::ConfigError,
                    origin + ": parse error at " + detail::line_context(text, at) + ": " + e.what());
    }
}

/// Applies "section.key=value" overrides. The value is read as JSON when it
/// parses (numbers, booleans, arrays) and as a string otherwise.
inline void apply_overrides(Json& j, const std::vector<std::string>& overrides) {
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        detail::require(eq != std::string::npos && eq > 0, ErrorKind::ConfigError,
                        "override '" + item + "': expected key=value");
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        Json value;
        try {
            value = Json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            value = text;
        }
        std::string pointer;
        std::stringstream ss(key);
        for (std::string part; std::getline(ss, part, '.');) {
            detail::require(!part.empty(), ErrorKind::ConfigError, "override '" + item + "': empty key segment");
            pointer += "/" + part;
        }
        try {
            j[Json::json_pointer(pointer)] = value;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ConfigError, "override '" + item + "': " + e.what());
        }
    }
}

inline ExperimentConfig config_from_json(const Json& j) {
    ExperimentConfig c;
    from_json(j, c);
    c.validate();
    return c;
}

inline ExperimentConfig load_config_text(const std::string& text, const std::vector<std::string>& overrides = {},
                                         const std::string& origin = "config") {
    Json j = parse_config_text(text, origin);
    detail::require(j.is_object(), ErrorKind::ConfigError, origin + ": top level must be an object");
    apply_overrides(j, overrides);
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::ConfigError, "cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str(), overrides, path.string());
}

inline std::string resolved_config_text(const ExperimentConfig& c) { return Json(c).dump(2) + "\n"; }

inline std::filesystem::path write_resolved_config(const ExperimentConfig& c, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "resolved_config.json";
    std::ofstream(path) << resolved_config_text(c);
    return path;
}

// ---------------------------------------------------------------- JSON reports

inline const char* to_string(Comparison c) {
    switch (c) {
        case Comparison::AtMost: return "at_most";
        case Comparison::AtLeast: return "at_least";
        case Comparison::Informational: return "info";
    }
    return "info";
}

inline Comparison comparison_from_string(const std::string& s) {
    if (s == "at_most") return Comparison::AtMost;
    if (s == "at_least") return Comparison::AtLeast;
    return Comparison::Informational;
}

inline void to_json(Json& j, const Metric& m) {
    j = Json{{"name", m.name}, {"value", m.value}, {"comparison", to_string(m.comparison)}};
    if (m.comparison != Comparison::Informational) {
        j["threshold"] = m.threshold;
        j["pass"] = m.pass;
        j["near_threshold"] = m.near_threshold;
    }
}

inline void from_json(const Json& j, Metric& m) {
    m.name = j.at("name").get<std::string>();
    m.value = j.at("value").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("value").get<double>();
    m.comparison = comparison_from_string(j.value("comparison", "info"));
    m.threshold = j.value("threshold", 0.0);
    m.pass = j.value("pass", true);
    m.near_threshold = j.value("near_threshold", false);
}

inline void to_json(Json& j, const StageReport& r) {
    j = Json{{"stage", r.stage}, {"passed", r.passed()}, {"config_hash", r.config_hash}, {"seed", r.seed},
             {"metrics", r.metrics}};
}

inline void from_json(const Json& j, StageReport& r) {
    r.stage = j.at("stage").get<std::string>();
    r.config_hash = j.value("config_hash", "");
    r.seed = j.value("seed", std::uint64_t{0});
    r.metrics = j.at("metrics").get<std::vector<Metric>>();
}

inline Json baseline_json(const BaselineRun& run) {
    return Json{{"reports", run.reports},
                {"patch_lin_rms", run.patch_lin_rms},
                {"patch_cov_error", run.patch_cov_error},
                {"bound", {{"checked", run.bounds.checked}, {"violations", run.bounds.violations}}}};
}

inline Json scan_json(const ScanResult& scan) {
    Json runs = Json::array();
    for (std::size_t i = 0; i < scan.runs.size(); ++i)
        runs.push_back(Json{{"label", scan.labels[i]}, {"value", scan.values[i]}, {"reports", scan.runs[i].reports}});
    return Json{{"axis", scan.axis}, {"runs", runs}, {"trends", scan.trends}};
}

inline Json modal_json(const ModalRun& m) {
    Json rows = Json::array();
    for (const auto& r : m.rows)
        rows.push_back(Json{{"Q", r.q},
                            {"global_closure", r.global_closure},
                            {"local_closure_center", r.local_center},
                            {"local_closure_left", r.local_left},
                            {"local_closure_right", r.local_right},
                            {"r_eff_Q", r.r_eff_q},
                            {"kl_energy_Q", r.kl_energy_q}});
    return Json{{"rows", rows}, {"report", m.report}, {"local_patches", m.local_patches}};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// Top-level report document. `generated_at` is the only field that changes
/// between identical runs.
inline Json report_document(const std::string& command, const ExperimentConfig& config,
                            const std::vector<StageReport>& verdicts, Json payload) {
    return Json{{"tool", "dispclutter"},
                {"version", kVersion},
                {"command", command},
                {"config_hash", config_hash(config)},
                {"seed", config.mc.seed},
                {"rng", kRngAlgorithm},
                {"passed", std::all_of(verdicts.begin(), verdicts.end(), [](const auto& r) { return r.passed(); })},
                {"verdicts", verdicts},
                {"result", std::move(payload)},
                {"generated_at", utc_timestamp()}};
}

// ---------------------------------------------------------------- tables

struct Table {
    std::string name;   // file stem
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// 6 significant digits for error-type values.
inline std::string fmt_error(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

/// 4 significant digits for spectral quantities.
inline std::string fmt_spectral(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

inline std::string fmt_int(double v) { return std::to_string(static_cast<long long>(std::llround(v))); }

inline std::string verdict(const Metric& m) {
    if (m.comparison == Comparison::Informational) return "info";
    if (!m.pass) return "FAIL";
    return m.near_threshold ? "PASS (near)" : "PASS";
}

inline std::string threshold_text(const Metric& m, std::string (*fmt)(double) = fmt_error) {
    switch (m.comparison) {
        case Comparison::AtMost: return "<= " + fmt(m.threshold);
        case Comparison::AtLeast: return ">= " + fmt(m.threshold);
        case Comparison::Informational: return "-";
    }
    return "-";
}

inline std::string render_text(const Table& t) {
    std::vector<std::size_t> width(t.columns.size(), 0);
    for (std::size_t c = 0; c < t.columns.size(); ++c) width[c] = t.columns[c].size();
    for (const auto& row : t.rows)
        for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::ostringstream os;
    os << t.title << "\n";
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            os << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << cell;
        }
        os << "\n";
    };
    line(t.columns);
    std::size_t total = 0;
    for (auto w : width) total += w;
    os << std::string(total + 2 * (width.size() - 1), '-') << "\n";
    for (const auto& row : t.rows) line(row);
    return os.str();
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline std::string render_csv(const Table& t) {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) os << (c ? "," : "") << csv_escape(cells[c]);
        os << "\n";
    };
    line(t.columns);
    for (const auto& row : t.rows) line(row);
    return os.str();
}

/// Threshold table of the stage A-D metrics, one row per thresholded metric.
inline Table stage_table(const std::vector<StageReport>& reports) {
    Table t{"stage_metrics", "Baseline consistency (stages A-D)", {"stage", "metric", "value", "threshold", "verdict"}, {}};
    for (const auto& r : reports) {
        if (r.stage == "E") continue;
        for (const auto& m : r.metrics)
            if (m.comparison != Comparison::Informational)
                t.rows.push_back({r.stage, m.name, fmt_error(m.value), threshold_text(m), verdict(m)});
    }
    return t;
}

inline Table stage_e_table(const StageReport& e) {
    Table t{"stage_e", "Spectral structure of R_c (theory vs Monte Carlo)",
            {"metric", "theory", "mc", "gap", "threshold", "verdict"}, {}};
    auto row = [&](const std::string& label, const std::string& key, bool integer) {
        const auto f = integer ? fmt_int : fmt_spectral;
        const double th = e.value(key + "_theory"), mc = e.value(key + "_mc");
        std::string gap = "-", thr = "-", ver = "info";
        if (e.has(key + "_gap")) {
            const Metric& g = e.metric(key + "_gap");
            gap = integer ? fmt_int(g.value) : fmt_spectral(g.value);
            thr = threshold_text(g, integer ? fmt_int : fmt_spectral);
            ver = verdict(g);
        } else {
            gap = f(std::abs(th - mc));
        }
        t.rows.push_back({label, f(th), f(mc), gap, thr, ver});
    };
    row("r_eff", "r_eff", false);
    row("p_rho", "p_rho", true);
    row("eta", "eta", false);
    row("gamma", "gamma", false);
    return t;
}

inline Table trend_table(const StageReport& trends, const std::string& name, const std::string& title) {
    Table t{name, title, {"check", "value", "threshold", "verdict"}, {}};
    for (const auto& m : trends.metrics)
        t.rows.push_back({m.name, fmt_error(m.value), threshold_text(m), verdict(m)});
    return t;
}

inline Table scan_table(const ScanResult& scan, const std::string& name, const std::string& title) {
    Table t{name, title,
            {scan.axis, "stage_a_cov", "stage_b_cov", "stage_b_lin", "stage_c_cov_max", "stage_c_lin_max", "rmed",
             "rc"},
            {}};
    for (std::size_t i = 0; i < scan.runs.size(); ++i) {
        const auto& r = scan.runs[i];
        t.rows.push_back({scan.labels[i], fmt_error(r.stage("A").value("permittivity_cov_error")),
                          fmt_error(r.stage("B").value("wavenumber_cov_error")),
                          fmt_error(r.stage("B").value("wavenumber_lin_rms")),
                          fmt_error(r.stage("C").value("steering_cov_error_max")),
                          fmt_error(r.stage("C").value("steering_lin_rms_max")),
                          fmt_error(r.stage("D").value("rmed_error")), fmt_error(r.stage("D").value("rc_error"))});
    }
    return t;
}

inline Table matern_table(const MaternScan& m) {
    Table t{"scan_matern", "Matern scan: worst-patch steering linearization RMS",
            {"nu", "ell_scale", "sigma_g", "stage_c_lin_max", "verdict"}, {}};
    for (std::size_t i = 0; i < m.scan.runs.size(); ++i) {
        const Metric& lin = m.scan.runs[i].stage("C").metric("steering_lin_rms_max");
        t.rows.push_back({fmt_spectral(m.nus[i]), fmt_spectral(m.ell_scales[i]), fmt_spectral(m.sigmas[i]),
                          fmt_error(lin.value), verdict(lin)});
    }
    return t;
}

inline Table matern_group_table(const MaternScan& m) {
    Table t{"scan_matern_groups", "Matern scan: group means", {"group", "key", "mean_lin_rms", "members"}, {}};
    for (const auto& g : m.groups)
        t.rows.push_back({g.by, fmt_spectral(g.key), fmt_error(g.mean_lin_rms), std::to_string(g.members)});
    return t;
}

inline Table modal_summary_table(const ModalRun& m) {
    Table t{"modal_summary", "Modal closure", {"metric", "value", "threshold", "verdict"}, {}};
    for (const auto& x : m.report.metrics) {
        const bool integer = x.name == "max_q" || x.name == "modes_for_99pct_energy" ||
                             x.name == "closure_monotone_violations";
        t.rows.push_back({x.name, integer ? fmt_int(x.value) : fmt_error(x.value), threshold_text(x), verdict(x)});
    }
    return t;
}

/// Plot-ready closure and KL-energy series against Q.
inline Table modal_closure_table(const ModalRun& m) {
    Table t{"modal_closure", "Closure error against truncation order",
            {"Q", "global_closure", "local_closure_center", "local_closure_left", "local_closure_right", "r_eff_Q",
             "kl_energy_Q"},
            {}};
    for (const auto& r : m.rows)
        t.rows.push_back({std::to_string(r.q), fmt_error(r.global_closure), fmt_error(r.local_center),
                          fmt_error(r.local_left), fmt_error(r.local_right), fmt_spectral(r.r_eff_q),
                          fmt_spectral(r.kl_energy_q)});
    return t;
}

/// Tables for a list of stage reports (baseline shape when stages A-E are
/// present, a generic verdict table otherwise).
inline std::vector<Table> render_tables(const std::vector<StageReport>& reports) {
    std::vector<Table> out;
    if (reports.empty()) return out;
    const bool baseline = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.stage == "A"; });
    if (baseline) out.push_back(stage_table(reports));
    for (const auto& r : reports) {
        if (r.stage == "E" && r.has("r_eff_theory")) {
            out.push_back(stage_e_table(r));
        } else if (!baseline || (r.stage != "A" && r.stage != "B" && r.stage != "C" && r.stage != "D")) {
            out.push_back(trend_table(r, r.stage, r.stage));
        }
    }
    return out;
}

inline std::string render_all_text(const std::vector<Table>& tables) {
    if (tables.empty()) return "no reports to render\n";
    std::string s;
    for (const auto& t : tables) s += render_text(t) + "\n";
    return s;
}

/// Writes <name>.csv per table plus tables.txt; returns the text rendering.
inline std::string write_tables(const std::vector<Table>& tables, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& t : tables) std::ofstream(dir / (t.name + ".csv")) << render_csv(t);
    const std::string text = render_all_text(tables);
    std::ofstream(dir / "tables.txt") << text;
    return text;
}

/// 0 if every thresholded verdict passes, 1 otherwise. Execution errors are
/// mapped to kExitExecutionError by the caller.
inline int exit_code(const std::vector<StageReport>& reports) {
    return std::all_of(reports.begin(), reports.end(), [](const auto& r) { return r.passed(); })
               ? kExitPass
               : kExitThresholdFailure;
}

}  // namespace dispclutter

#endif  // DISPCLUTTER_REPORT_HPP
