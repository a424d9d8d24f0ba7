// kcve: firmware kernel CVE applicability.
//
//   kcve scan FIRMWARE...                      version, config and ISA per image
//   kcve attribute --nvd DUMP FIRMWARE...      full pipeline, one report per kernel
//   kcve stats --nvd DUMP [--run run.json] [REPORT...]

#include "kcve/errors.hpp"
#include "kcve/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kFatalInput = 3 };

int verbosity = 1;

void note(int level, const std::string& msg) {
    if (verbosity >= level) std::cerr << msg << "\n";
}

std::vector<fs::path> nvd_paths(const std::vector<std::string>& flags) {
    std::vector<fs::path> out(flags.begin(), flags.end());
    if (out.empty()) {
        if (const char* env = std::getenv("KCVE_NVD_DUMP"); env && *env) out.emplace_back(env);
    }
    if (out.empty()) throw kcve::PreconditionError("no NVD dump given (use --nvd or KCVE_NVD_DUMP)");
    return out;
}

kcve::NvdSnapshot load_nvd(const std::vector<std::string>& flags) {
    kcve::Diagnostics diag;
    auto snap = kcve::ingest_nvd_paths(nvd_paths(flags), &diag);
    for (const auto& w : diag.warnings()) note(2, "nvd: " + w);
    note(1, fmt::format("nvd: {} kernel CVE records ({})", snap.records.size(), snap.schema));
    return snap;
}

fs::path default_cache() {
    if (const char* env = std::getenv("KCVE_CACHE_DIR"); env && *env) return env;
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "kcve";
    if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "kcve";
    return ".kcve-cache";
}

void print_stage(const std::string& who, const kcve::StageOutcome& s) {
    if (s.status == kcve::StageStatus::succeeded) {
        note(2, fmt::format("{}: {} ok {}", who, s.stage, s.detail));
        return;
    }
    std::string first = s.detail.substr(0, s.detail.find('\n'));
    note(1, fmt::format("{}: {} {}: {}", who, s.stage, kcve::to_string(s.status), first));
    if (s.status == kcve::StageStatus::failed && s.detail.find('\n') != std::string::npos) note(2, s.detail);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Firmware kernel CVE applicability"};
    app.set_version_flag("--version", std::string("kcve ") + KCVE_VERSION);
    app.require_subcommand(1);

    bool verbose = false, quiet = false;
    unsigned workers = 0;
    std::string tables_path;
    app.add_flag("-v,--verbose", verbose, "Print every stage outcome and warning");
    app.add_flag("-q,--quiet", quiet, "Errors only");
    app.add_option("-j,--workers", workers, "Worker threads (0: one per core)");
    app.add_option("--arch-tables", tables_path, "Architecture tables file")->check(CLI::ExistingFile);

    // scan
    auto* scan = app.add_subcommand("scan", "Find kernel versions, configurations and the ISA in firmware images");
    std::vector<std::string> scan_inputs;
    std::string scan_out;
    scan->add_option("firmware", scan_inputs, "Unpacked firmware directories or files")->required()->check(CLI::ExistingPath);
    scan->add_option("-o,--out", scan_out, "Write <name>.scan.json here instead of stdout");

    // attribute
    auto* attr = app.add_subcommand("attribute", "Classify version-matched CVEs against the configured kernel build");
    std::vector<std::string> attr_inputs, nvd;
    std::string out_dir = "kcve-out", cache_dir, build_log, format = "canonical";
    bool offline = false;
    attr->add_option("firmware", attr_inputs, "Unpacked firmware directories or files")->required()->check(CLI::ExistingPath);
    attr->add_option("--nvd", nvd, "NVD JSON dump (file or directory, repeatable)");
    attr->add_option("-o,--out", out_dir, "Output directory");
    attr->add_option("--cache", cache_dir, "Kernel source cache");
    attr->add_flag("--offline", offline, "Never download; use cached sources only");
    attr->add_option("--format", format, "Report format")->check(CLI::IsMember({"canonical", "tabular"}));
    attr->add_option("--build-log", build_log, "Use this make -n log instead of fetching and building")
        ->check(CLI::ExistingFile);

    // stats
    auto* stats = app.add_subcommand("stats", "Coverage, reference classes and corpus medians");
    std::vector<std::string> stats_nvd, reports;
    std::string run_path;
    stats->add_option("--nvd", stats_nvd, "NVD JSON dump (file or directory, repeatable)");
    stats->add_option("--run", run_path, "run.json from an attribute run")->check(CLI::ExistingFile);
    stats->add_option("reports", reports, "Canonical JSON reports")->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    verbosity = quiet ? 0 : verbose ? 2 : 1;

    try {
        kcve::ArchTables tables;
        const kcve::ArchTables* tp = nullptr;
        if (!tables_path.empty()) {
            tables = kcve::load_arch_tables(tables_path);
            tp = &tables;
        }

        if (*scan) {
            kcve::StageOneOptions o;
            o.workers = workers;
            o.tables = tp;
            if (!scan_out.empty()) fs::create_directories(scan_out);
            for (const auto& in : scan_inputs) {
                auto a = kcve::analyze_firmware(in, o);
                for (const auto& w : a.warnings) note(2, a.name + ": " + w);
                std::string doc = kcve::stage_one_json(a);
                if (scan_out.empty()) {
                    std::cout << doc;
                } else {
                    kcve::write_file(fs::path(scan_out) / (a.name + ".scan.json"), doc);
                }
            }
            return kOk;
        }

        if (*attr) {
            kcve::NvdSnapshot snap = load_nvd(nvd);
            kcve::PipelineOptions o;
            o.out_dir = out_dir;
            o.cache_dir = cache_dir.empty() ? default_cache() : fs::path(cache_dir);
            o.snapshot = &snap;
            o.offline = offline;
            o.workers = workers;
            o.format = format == "tabular" ? kcve::ReportFormat::tabular : kcve::ReportFormat::canonical;
            if (!build_log.empty()) o.build_log = build_log;
            o.stage_one.tables = tp;
            std::vector<fs::path> inputs(attr_inputs.begin(), attr_inputs.end());
            auto run = kcve::run_pipeline(inputs, o);
            for (const auto& f : run.firmware) {
                for (const auto& s : f.stages) print_stage(f.name, s);
                for (const auto& w : f.warnings) note(2, f.name + ": " + w);
                for (const auto& k : f.kernels) {
                    std::string who = f.name + "/" + k.version.to_string();
                    for (const auto& s : k.stages) print_stage(who, s);
                    if (k.report) {
                        const auto& r = *k.report;
                        note(1, fmt::format("{}: {} candidates, {} High, {} NotApplicable, {} Medium, {} Low -> {}", who,
                                            r.candidates(), r.counts[0], r.counts[1], r.counts[2], r.counts[3],
                                            k.report_path.string()));
                    }
                }
            }
            return run.exit_code() ? kFailure : kOk;
        }

        if (*stats) {
            nlohmann::json out = nlohmann::json::object();
            if (!stats_nvd.empty() || std::getenv("KCVE_NVD_DUMP") || !run_path.empty()) {
                kcve::NvdSnapshot snap = load_nvd(stats_nvd);
                kcve::PipelineRun run;
                if (!run_path.empty()) run = kcve::run_from_json(kcve::read_text_file(run_path));
                out = nlohmann::json::parse(kcve::to_json(kcve::applicability_stats(run, snap)));
                if (run_path.empty()) out.erase("firmware_coverage");
            }
            if (!reports.empty()) {
                std::vector<kcve::AttributionReport> parsed;
                for (const auto& r : reports) parsed.push_back(kcve::report_from_json(kcve::read_text_file(r)));
                out["corpus"] = nlohmann::json::parse(kcve::to_json(kcve::summarize_corpus(parsed)));
            }
            if (out.empty()) throw kcve::PreconditionError("stats needs --nvd, --run or report files");
            std::cout << out.dump(2) << "\n";
            return kOk;
        }
    } catch (const kcve::PreconditionError& e) {
        std::cerr << "kcve: " << e.what() << "\n";
        return kUsage;
    } catch (const kcve::Error& e) {
        std::cerr << "kcve: " << e.what() << "\n";
        return kFatalInput;
    } catch (const std::exception& e) {
        std::cerr << "kcve: " << e.what() << "\n";
        return kFailure;
    }
    return kOk;
}
