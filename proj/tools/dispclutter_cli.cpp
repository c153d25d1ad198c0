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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dispclutter/report.hpp"

namespace fs = std::filesystem;
using namespace dispclutter;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::vector<std::string> overrides;
    std::string input;
};

void write_json(const fs::path& path, const Json& doc) { std::ofstream(path) << doc.dump(2) << "\n"; }

int finish(const std::string& command, const ExperimentConfig& config, const fs::path& out,
           const std::vector<StageReport>& verdicts, Json payload, const std::vector<Table>& tables) {
    write_json(out / "report.json", report_document(command, config, verdicts, std::move(payload)));
    std::cout << write_tables(tables, out);
    const int code = exit_code(verdicts);
    std::cout << (code == kExitPass ? "all verdicts pass" : "threshold verdicts failed") << " (" << out.string()
              << ")\n";
    return code;
}

int run_command(const std::string& command, const Options& opt) {
    const fs::path out(opt.out);
    if (command == "report") {
        std::ifstream in(opt.input);
        detail::require(static_cast<bool>(in), ErrorKind::ConfigError, "cannot read report " + opt.input);
        Json doc;
        try {
            doc = Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ConfigError, opt.input + ": " + e.what());
        }
        const auto verdicts = doc.value("verdicts", Json::array()).get<std::vector<StageReport>>();
        std::vector<Table> tables = render_tables(verdicts);
        const Json& result = doc.value("result", Json::object());
        if (result.contains("rows")) {
            Table t{"modal_closure", "Closure error against truncation order",
                    {"Q", "global_closure", "local_closure_center", "local_closure_left", "local_closure_right",
                     "r_eff_Q", "kl_energy_Q"},
                    {}};
            for (const auto& r : result.at("rows"))
                t.rows.push_back({std::to_string(r.at("Q").get<int>()), fmt_error(r.at("global_closure").get<double>()),
                                  fmt_error(r.at("local_closure_center").get<double>()), fmt_error(r.at("local_closure_left").get<double>()),
                                  fmt_error(r.at("local_closure_right").get<double>()), fmt_spectral(r.at("r_eff_Q").get<double>()),
                                  fmt_spectral(r.at("kl_energy_Q").get<double>())});
            tables.push_back(t);
        }
        std::cout << write_tables(tables, out);
        return exit_code(verdicts);
    }

    const ExperimentConfig config = load_config(opt.config, opt.overrides);
    write_resolved_config(config, out);
    const auto t0 = std::chrono::steady_clock::now();
    int code = kExitPass;
    try {
        if (command == "baseline") {
            const BaselineRun run = run_baseline(config);
            code = finish(command, config, out, run.reports, baseline_json(run), render_tables(run.reports));
        } else if (command == "scan-sigma" || command == "scan-nmc" || command == "scan-seed") {
            const ScanResult scan = command == "scan-sigma" ? run_sigma_scan(config)
                                    : command == "scan-nmc" ? run_nmc_scan(config)
                                                            : run_seed_scan(config);
            const std::string stem = "scan_" + command.substr(5);
            code = finish(command, config, out, {scan.trends}, scan_json(scan),
                          {scan_table(scan, stem, "Scan over " + scan.axis),
                           trend_table(scan.trends, stem + "_trends", "Trend checks over " + scan.axis)});
        } else if (command == "scan-matern") {
            const MaternScan m = run_matern_scan(config);
            Json payload = scan_json(m.scan);
            Json groups = Json::array();
            for (const auto& g : m.groups)
                groups.push_back({{"by", g.by}, {"key", g.key}, {"mean_lin_rms", g.mean_lin_rms}, {"members", g.members}});
            payload["groups"] = groups;
            code = finish(command, config, out, {m.scan.trends}, payload,
                          {matern_table(m), matern_group_table(m),
                           trend_table(m.scan.trends, "scan_matern_trends", "Trend checks over Matern groups")});
        } else if (command == "modal") {
            const ModalRun m = run_modal(config);
            code = finish(command, config, out, {m.report}, modal_json(m),
                          {modal_summary_table(m), modal_closure_table(m)});
        }
    } catch (const StageFailure& f) {
        write_json(out / "report.json", report_document(command, config, f.partial(),
                                                        Json{{"error", f.what()}, {"failed_stage", f.stage()}}));
        throw;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << command << " finished in " << std::fixed << std::setprecision(2) << secs << " s\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dispersive-medium clutter covariance: theory vs Monte Carlo validation"};
    app.require_subcommand(1, 1);
    Options opt;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"baseline", "Stage A-E validation at the configured parameters"},
        {"scan-sigma", "Scan over the field amplitude sigma_g"},
        {"scan-nmc", "Scan over the Monte Carlo sample size (nested streams)"},
        {"scan-seed", "Scan over random seeds"},
        {"scan-matern", "Scan over Matern smoothness, length scale and amplitude"},
        {"modal", "KL modal truncation and closure errors"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", opt.config, "Config file (JSON; empty file = defaults)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("-o,--out", opt.out, "Output directory")->capture_default_str();
        sub->add_option("-s,--set", opt.overrides, "Override, e.g. mc.seed=20260316 (repeatable)");
    }
    auto* report = app.add_subcommand("report", "Re-render tables from a report.json");
    report->add_option("-i,--input", opt.input, "report.json written by another command")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_option("-o,--out", opt.out, "Output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitExecutionError;
    }
    try {
        return run_command(app.get_subcommands().front()->get_name(), opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExecutionError;
    }
}
