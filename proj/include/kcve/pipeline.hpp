#pragma once

#include "kcve/arch.hpp"
#include "kcve/attribution.hpp"
#include "kcve/dry_build.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/kernel_scan.hpp"
#include "kcve/nvd.hpp"
#include "kcve/source.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace kcve {

// ---- stage one ----

struct ConfigFinding {
    std::string file;
    KernelConfig config;
};

struct StageOneOptions {
    std::size_t max_file_size = std::size_t{512} << 20;
    unsigned workers = 0;
    PlaintextOptions plaintext;
    IkconfigOptions ikconfig;
    const ArchTables* tables = nullptr;  // null: built-in tables
};

struct FirmwareAnalysis {
    std::string name;
    std::filesystem::path root;
    FirmwareInventory inventory;
    std::vector<ConfigFinding> configs;  // file order
    ArchVerdict arch;
    std::vector<std::string> warnings;
};

/// Version scan, configuration extraction and architecture detection over
/// every regular file below `root` (or `root` itself when it is a file).
FirmwareAnalysis analyze_firmware(const std::filesystem::path& root, const StageOneOptions& options = {});

std::string stage_one_json(const FirmwareAnalysis& analysis);

// ---- pipeline ----

enum class StageStatus { succeeded, skipped, failed };

std::string_view to_string(StageStatus s);

struct StageOutcome {
    std::string stage;
    StageStatus status = StageStatus::succeeded;
    std::string detail;  // skip reason or error message
};

struct KernelRun {
    KernelVersion version;
    std::string kernel_file;
    std::string config_file;
    std::vector<StageOutcome> stages;
    std::optional<AttributionReport> report;
    std::filesystem::path report_path;
};

struct FirmwareRun {
    std::string name;
    std::filesystem::path root;
    std::vector<StageOutcome> stages;  // extract, version, arch, config
    std::vector<KernelRun> kernels;
    std::vector<std::string> warnings;

    const StageOutcome* stage(std::string_view name) const;
    bool hard_failure() const;
};

struct PipelineRun {
    std::vector<std::filesystem::path> inputs;
    std::vector<FirmwareRun> firmware;
    std::vector<std::filesystem::path> reports;
    std::optional<std::filesystem::path> corpus_summary;

    /// 0 when every firmware succeeded or was skipped, 1 on any hard failure.
    int exit_code() const;
};

enum class ReportFormat { canonical, tabular };

struct PipelineHooks {
    std::function<SourceTree(const KernelVersion&)> fetch;
    std::function<std::string(const SourceTree&, const KernelConfig&, const ArchVerdict&)> dry_build;
};

struct PipelineOptions {
    std::filesystem::path out_dir;
    std::filesystem::path cache_dir;
    const NvdSnapshot* snapshot = nullptr;
    Transport* transport = nullptr;  // null: offline unless `offline` is false, then curl
    bool offline = false;
    unsigned workers = 0;
    ReportFormat format = ReportFormat::canonical;
    std::optional<std::filesystem::path> build_log;  // skip fetch and dry build, use this log
    StageOneOptions stage_one;
    DryBuildOptions dry_build;
    PipelineHooks hooks;  // test seams; empty members use the real implementations
};

/// Runs both stages for each input firmware. Failures are recorded per
/// firmware and never abort the batch. Writes one report per kernel and,
/// for two or more reports, corpus_summary.json, plus run.json describing
/// every stage outcome.
PipelineRun run_pipeline(const std::vector<std::filesystem::path>& inputs, const PipelineOptions& options);

std::string run_to_json(const PipelineRun& run);
PipelineRun run_from_json(std::string_view json);

struct ApplicabilityStats {
    std::size_t firmware = 0;
    // firmware passing each stage-one step, and the fraction
    std::size_t extracted = 0, with_version = 0, with_arch = 0, with_config = 0;
    double extracted_fraction = 0, version_fraction = 0, arch_fraction = 0, config_fraction = 0;
    // snapshot partition by reference class
    std::size_t records = 0, full_path = 0, file_only = 0, no_reference = 0;
    double full_path_fraction = 0, file_only_fraction = 0, no_reference_fraction = 0;
};

ApplicabilityStats applicability_stats(const PipelineRun& run, const NvdSnapshot& snapshot);
std::string to_json(const ApplicabilityStats& stats);

}  // namespace kcve
