#include "kcve/pipeline.hpp"
#include "kcve/errors.hpp"
#include "kcve/mime.hpp"
#include "kcve/witness.hpp"
#include "json_util.hpp"
#include "parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kcve {

namespace {

struct FileSlot {
    std::string mime;
    std::vector<VersionHit> hits;
    std::optional<KernelConfig> config;
    std::vector<ArchGuess> guesses;
    Diagnostics diag;
};

void analyze_file(const fs::path& path, const std::string& rel, const StageOneOptions& o, const ArchTables& tables,
                  FileSlot& slot) {
    std::error_code ec;
    auto size = fs::file_size(path, ec);
    if (ec) {
        slot.diag.warn(fmt::format("{}: {}", rel, ec.message()));
        return;
    }
    if (size > o.max_file_size) {
        slot.diag.warn(fmt::format("{}: skipped, {} bytes exceeds limit of {}", rel, size, o.max_file_size));
        return;
    }
    Bytes blob = read_file(path);
    slot.mime = sniff_mime(blob, rel);
    slot.hits = scan_file_for_kernel_version(blob, slot.mime);
    for (auto& h : slot.hits) h.path = rel;

    Diagnostics d;
    switch (classify_candidate(blob, slot.mime, rel)) {
        case CandidateKind::plain_text:
            slot.config = extract_plaintext_config(as_chars(blob), o.plaintext);
            break;
        case CandidateKind::kernel_binary:
            try {
                if (auto m = find_ikconfig(blob, o.ikconfig, &d)) slot.config = std::move(m->config);
            } catch (const ExtractionError& e) {
                d.warn(e.what());
            }
            break;
        case CandidateKind::other: break;
    }
    if (slot.config) slot.config->origin_path = rel;

    auto keep = [&](std::optional<ArchGuess> g) {
        if (!g) return;
        g->file = rel;
        slot.guesses.push_back(std::move(*g));
    };
    keep(detect_from_elf(blob, &d));
    keep(detect_from_device_tree(blob, &d, tables));
    keep(detect_from_mime(blob, slot.mime, tables));
    if (slot.config) keep(detect_from_config(*slot.config, tables));
    for (const auto& w : d.warnings()) slot.diag.warn(fmt::format("{}: {}", rel, w));
}

std::string slug(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_' ? c : '_');
    return out.empty() ? "firmware" : out;
}

std::string firmware_name(const fs::path& p) {
    fs::path q = p;
    if (!q.has_filename()) q = q.parent_path();
    std::string n = q.filename().string();
    return n.empty() ? p.string() : n;
}

json stages_json(const std::vector<StageOutcome>& stages) {
    json out = json::array();
    for (const auto& s : stages) out.push_back({{"stage", s.stage}, {"status", to_string(s.status)}, {"detail", s.detail}});
    return out;
}

std::vector<StageOutcome> stages_from(const json& j) {
    std::vector<StageOutcome> out;
    for (const auto& s : j) {
        StageOutcome o;
        o.stage = s.value("stage", "");
        std::string st = s.value("status", "");
        o.status = st == "failed" ? StageStatus::failed : st == "skipped" ? StageStatus::skipped : StageStatus::succeeded;
        o.detail = s.value("detail", "");
        out.push_back(std::move(o));
    }
    return out;
}

struct Pairing {
    KernelVersion version;
    std::string kernel_file;
    const ConfigFinding* config;
};

// Config from the same file as the version banner when there is one;
// otherwise the only config; otherwise every config, with a warning.
std::vector<Pairing> pair_kernels(const FirmwareAnalysis& a, std::vector<std::string>& warnings) {
    std::vector<Pairing> out;
    std::map<KernelVersion, std::vector<std::string>, ExactVersionLess> files;
    for (const auto& h : a.inventory.hits) {
        auto& f = files[h.version];
        if (std::find(f.begin(), f.end(), h.path) == f.end()) f.push_back(h.path);
    }
    for (const auto& [version, paths] : files) {
        const ConfigFinding* same = nullptr;
        std::string kernel_file = paths.front();
        for (const auto& c : a.configs) {
            auto it = std::find(paths.begin(), paths.end(), c.file);
            if (it != paths.end()) {
                same = &c;
                kernel_file = *it;
                break;
            }
        }
        if (same) {
            out.push_back({version, kernel_file, same});
        } else if (a.configs.size() == 1) {
            out.push_back({version, kernel_file, &a.configs.front()});
        } else {
            warnings.push_back(fmt::format("kernel {}: no configuration from the same file; pairing with all {} configurations",
                                           version.to_string(), a.configs.size()));
            for (const auto& c : a.configs) out.push_back({version, kernel_file, &c});
        }
    }
    return out;
}

struct Shared {
    const PipelineOptions& options;
    Transport& transport;
    std::string tool_version;
};

void run_kernel(const FirmwareAnalysis& a, const Pairing& p, const fs::path& out_dir, const std::string& base,
                Shared& sh, KernelRun& kr) {
    const auto& o = sh.options;
    kr.version = p.version;
    kr.kernel_file = p.kernel_file;
    kr.config_file = p.config->file;
    auto outcome = [&](std::string stage, StageStatus st, std::string detail = {}) {
        kr.stages.push_back({std::move(stage), st, std::move(detail)});
    };

    std::vector<CveRecord> candidates = version_filter(*o.snapshot, p.version);
    outcome("cve-filter", StageStatus::succeeded, fmt::format("{} version-matched CVEs", candidates.size()));

    WitnessSet witnesses;
    SourceTree tree;
    if (o.build_log) {
        outcome("fetch", StageStatus::skipped, "build log supplied");
        outcome("dry-build", StageStatus::skipped, "build log supplied");
        try {
            witnesses = parse_build_log(read_text_file(*o.build_log));
        } catch (const std::exception& e) {
            outcome("witness", StageStatus::failed, e.what());
            return;
        }
    } else {
        try {
            tree = o.hooks.fetch ? o.hooks.fetch(p.version) : fetch_kernel_source(p.version, o.cache_dir, sh.transport);
            outcome("fetch", StageStatus::succeeded, tree.url);
        } catch (const std::exception& e) {
            outcome("fetch", StageStatus::failed, e.what());
            return;
        }
        std::string log;
        try {
            if (o.hooks.dry_build) {
                log = o.hooks.dry_build(tree, p.config->config, a.arch);
            } else {
                fs::create_directories(o.cache_dir / "locks");
                FileLock lock(tree_lock_path(o.cache_dir, p.version));
                DryBuildOptions dopt = o.dry_build;
                if (!out_dir.empty()) dopt.log_path = out_dir / (base + ".build.log");
                log = run_dry_build(tree, p.config->config, a.arch, dopt).log;
            }
            outcome("dry-build", StageStatus::succeeded);
        } catch (const BuildFailed& e) {
            std::string tail;
            for (const auto& l : e.log_tail()) tail += l + "\n";
            outcome("dry-build", StageStatus::failed, fmt::format("{}\n{}", e.what(), tail));
            return;
        } catch (const ToolMissing& e) {
            outcome("dry-build", StageStatus::failed, fmt::format("environment: {}", e.what()));
            return;
        } catch (const std::exception& e) {
            outcome("dry-build", StageStatus::failed, e.what());
            return;
        }
        BuildLogStats stats;
        witnesses = parse_build_log(log, &stats, tree.root.string());
        if (!out_dir.empty()) witnesses.save(out_dir / (base + ".witnessed.txt"));
    }
    outcome("witness", StageStatus::succeeded, fmt::format("{} witnessed source files", witnesses.size()));

    AttributionContext ctx;
    ctx.firmware = a.name;
    ctx.kernel_file = p.kernel_file;
    ctx.kernel = p.version;
    ctx.arch = a.arch;
    ctx.config_source = p.config->config.source_kind;
    ctx.config_origin = p.config->file;
    ctx.config_options = p.config->config.size();
    ctx.kernel_source_url = tree.url;
    ctx.kernel_source_sha256 = tree.sha256;
    ctx.nvd_snapshot_date = o.snapshot->snapshot_date;
    ctx.nvd_source = o.snapshot->source;
    ctx.tool_version = sh.tool_version;
    kr.report = attribute(std::move(candidates), witnesses, std::move(ctx));
    outcome("attribute", StageStatus::succeeded);

    if (out_dir.empty()) return;
    try {
        bool tabular = o.format == ReportFormat::tabular;
        kr.report_path = out_dir / (base + (tabular ? ".report.tsv" : ".report.json"));
        write_file(kr.report_path, tabular ? to_tabular(*kr.report) : to_canonical_json(*kr.report));
        outcome("report", StageStatus::succeeded, kr.report_path.string());
    } catch (const std::exception& e) {
        kr.report_path.clear();
        outcome("report", StageStatus::failed, e.what());
    }
}

FirmwareRun run_firmware(const fs::path& root, const std::string& name, unsigned inner_workers, Shared& sh) {
    const auto& o = sh.options;
    FirmwareRun fr;
    fr.name = name;
    fr.root = root;
    FirmwareAnalysis a;
    try {
        StageOneOptions s1 = o.stage_one;
        s1.workers = inner_workers;
        a = analyze_firmware(root, s1);
        a.name = name;
        fr.stages.push_back({"extract", StageStatus::succeeded, {}});
    } catch (const std::exception& e) {
        fr.stages.push_back({"extract", StageStatus::failed, e.what()});
        return fr;
    }
    fr.warnings = a.warnings;

    bool ok = true;
    auto gate = [&](std::string stage, bool pass, std::string detail, std::string reason) {
        fr.stages.push_back({std::move(stage), pass ? StageStatus::succeeded : StageStatus::skipped,
                             pass ? std::move(detail) : std::move(reason)});
        ok = ok && pass;
    };
    std::string versions;
    for (const auto& v : a.inventory.distinct_versions) versions += (versions.empty() ? "" : ", ") + v.to_string();
    gate("version", !a.inventory.distinct_versions.empty(), versions, "no kernel version");
    gate("arch", a.arch.resolved.has_value(),
         a.arch.resolved ? fmt::format("{} {} {}", a.arch.resolved->family,
                                       a.arch.resolved->bits ? std::to_string(a.arch.resolved->bits) : "?",
                                       to_string(a.arch.resolved->endianness))
                         : "",
         a.arch.guesses.empty() ? "no architecture evidence" : "architecture evidence inconclusive");
    std::string cfgs;
    for (const auto& c : a.configs) cfgs += (cfgs.empty() ? "" : ", ") + c.file;
    gate("config", !a.configs.empty(), cfgs, "no kernel configuration");
    if (!ok) return fr;

    fs::path out_dir;
    if (!o.out_dir.empty()) {
        out_dir = o.out_dir / name;
        fs::create_directories(out_dir);
    }
    auto pairs = pair_kernels(a, fr.warnings);
    std::map<std::string, int> used;
    for (const auto& p : pairs) {
        std::string base = slug(p.version.to_string());
        if (int n = used[base]++; n > 0) base += fmt::format("-{}", n + 1);
        KernelRun kr;
        try {
            run_kernel(a, p, out_dir, base, sh, kr);
        } catch (const std::exception& e) {
            kr.stages.push_back({"attribute", StageStatus::failed, e.what()});
        }
        fr.kernels.push_back(std::move(kr));
    }
    return fr;
}

}  // namespace

std::string_view to_string(StageStatus s) {
    switch (s) {
        case StageStatus::succeeded: return "succeeded";
        case StageStatus::skipped: return "skipped";
        case StageStatus::failed: return "failed";
    }
    return "failed";
}

FirmwareAnalysis analyze_firmware(const fs::path& root, const StageOneOptions& o) {
    const ArchTables& tables = o.tables ? *o.tables : ArchTables::builtin();
    FirmwareAnalysis a;
    a.root = root;
    a.name = firmware_name(root);
    a.inventory.root = root;

    Diagnostics walk;
    std::vector<std::string> files = list_regular_files(root, &walk);
    bool single = fs::is_regular_file(fs::symlink_status(root));
    std::vector<FileSlot> slots(files.size());
    detail::parallel_for(files.size(), o.workers, [&](std::size_t i) {
        try {
            analyze_file(single ? root : root / files[i], files[i], o, tables, slots[i]);
        } catch (const std::exception& e) {
            slots[i].diag.warn(fmt::format("{}: {}", files[i], e.what()));
        }
    });

    a.warnings = walk.warnings();
    std::set<KernelVersion, ExactVersionLess> versions;
    std::vector<ArchGuess> guesses;
    for (std::size_t i = 0; i < files.size(); ++i) {
        FileSlot& s = slots[i];
        a.warnings.insert(a.warnings.end(), s.diag.warnings().begin(), s.diag.warnings().end());
        if (!s.mime.empty()) a.inventory.mime_types[files[i]] = s.mime;
        for (auto& h : s.hits) {
            versions.insert(h.version);
            a.inventory.hits.push_back(std::move(h));
        }
        if (s.config) a.configs.push_back({files[i], std::move(*s.config)});
        for (auto& g : s.guesses) guesses.push_back(std::move(g));
    }
    a.inventory.distinct_versions.assign(versions.begin(), versions.end());
    a.inventory.warnings = a.warnings;
    a.arch = consolidate(std::move(guesses));
    return a;
}

std::string stage_one_json(const FirmwareAnalysis& a) {
    json hits = json::array();
    for (const auto& h : a.inventory.hits)
        hits.push_back({{"path", h.path},
                        {"offset", h.offset},
                        {"raw", h.raw},
                        {"version", h.version.to_string()},
                        {"encoding", h.encoding == TextEncoding::ascii ? "ascii" : "utf-16le"}});
    json versions = json::array();
    for (const auto& v : a.inventory.distinct_versions) versions.push_back(v.to_string());
    json configs = json::array();
    for (const auto& c : a.configs)
        configs.push_back({{"file", c.file}, {"source_kind", to_string(c.config.source_kind)}, {"options", c.config.size()}});
    std::map<std::string, std::size_t> mime_counts;
    for (const auto& [path, m] : a.inventory.mime_types) ++mime_counts[m];
    json doc = {{"firmware", a.name},
                {"root", a.root.string()},
                {"files", a.inventory.mime_types.size()},
                {"mime_types", mime_counts},
                {"hits", hits},
                {"distinct_versions", versions},
                {"configs", configs},
                {"arch", arch_json(a.arch)},
                {"warnings", a.warnings}};
    return doc.dump(2) + "\n";
}

const StageOutcome* FirmwareRun::stage(std::string_view n) const {
    for (const auto& s : stages)
        if (s.stage == n) return &s;
    return nullptr;
}

bool FirmwareRun::hard_failure() const {
    auto failed = [](const StageOutcome& s) { return s.status == StageStatus::failed; };
    if (std::any_of(stages.begin(), stages.end(), failed)) return true;
    for (const auto& k : kernels)
        if (std::any_of(k.stages.begin(), k.stages.end(), failed)) return true;
    return false;
}

int PipelineRun::exit_code() const {
    return std::any_of(firmware.begin(), firmware.end(), [](const FirmwareRun& f) { return f.hard_failure(); }) ? 1 : 0;
}

PipelineRun run_pipeline(const std::vector<fs::path>& inputs, const PipelineOptions& o) {
    PipelineRun run;
    run.inputs = inputs;
    if (inputs.empty()) return run;
    if (!o.snapshot) throw PreconditionError("attribution needs an NVD snapshot");
    if (!o.build_log && !o.hooks.fetch && o.cache_dir.empty())
        throw PreconditionError("attribution needs a cache directory for kernel sources");

    OfflineTransport offline;
    CurlTransport curl;
    Transport& transport = o.transport ? *o.transport : o.offline ? static_cast<Transport&>(offline) : curl;
    Shared sh{o, transport, fmt::format("kcve {}", KCVE_VERSION)};

    std::vector<std::string> names;
    std::map<std::string, int> used;
    for (const auto& in : inputs) {
        std::string n = slug(firmware_name(in));
        if (int k = used[n]++; k > 0) n += fmt::format("-{}", k + 1);
        names.push_back(n);
    }
    if (!o.out_dir.empty()) fs::create_directories(o.out_dir);

    unsigned workers = detail::resolve_workers(o.workers);
    unsigned outer = static_cast<unsigned>(std::min<std::size_t>(workers, inputs.size()));
    unsigned inner = std::max(1u, workers / std::max(1u, outer));
    run.firmware.resize(inputs.size());
    detail::parallel_for(inputs.size(), outer, [&](std::size_t i) {
        try {
            run.firmware[i] = run_firmware(inputs[i], names[i], inner, sh);
        } catch (const std::exception& e) {
            run.firmware[i].name = names[i];
            run.firmware[i].root = inputs[i];
            run.firmware[i].stages.push_back({"extract", StageStatus::failed, e.what()});
        }
    });

    std::vector<AttributionReport> reports;
    for (const auto& f : run.firmware) {
        for (const auto& k : f.kernels) {
            if (!k.report_path.empty()) run.reports.push_back(k.report_path);
            if (k.report) reports.push_back(*k.report);
        }
    }
    if (!o.out_dir.empty()) {
        if (reports.size() >= 2) {
            try {
                CorpusStats stats = summarize_corpus(reports);
                run.corpus_summary = o.out_dir / "corpus_summary.json";
                write_file(*run.corpus_summary, to_json(stats));
            } catch (const PreconditionError&) {
                // every report empty: nothing to summarize
            }
        }
        write_file(o.out_dir / "run.json", run_to_json(run));
    }
    return run;
}

std::string run_to_json(const PipelineRun& run) {
    json inputs = json::array();
    for (const auto& p : run.inputs) inputs.push_back(p.string());
    json firmware = json::array();
    for (const auto& f : run.firmware) {
        json kernels = json::array();
        for (const auto& k : f.kernels) {
            kernels.push_back({{"version", k.version.to_string()},
                               {"kernel_file", k.kernel_file},
                               {"config_file", k.config_file},
                               {"stages", stages_json(k.stages)},
                               {"report", k.report_path.string()}});
        }
        firmware.push_back({{"name", f.name},
                            {"root", f.root.string()},
                            {"stages", stages_json(f.stages)},
                            {"kernels", kernels},
                            {"warnings", f.warnings}});
    }
    json reports = json::array();
    for (const auto& r : run.reports) reports.push_back(r.string());
    json doc = {{"schema", "kcve-run/1"},
                {"inputs", inputs},
                {"firmware", firmware},
                {"reports", reports},
                {"corpus_summary", run.corpus_summary ? json(run.corpus_summary->string()) : json(nullptr)},
                {"exit_code", run.exit_code()}};
    return doc.dump(2) + "\n";
}

PipelineRun run_from_json(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || doc.value("schema", "") != "kcve-run/1")
        throw SchemaError("$", "not a kcve run record");
    PipelineRun run;
    for (const auto& p : doc.value("inputs", json::array())) run.inputs.emplace_back(p.get<std::string>());
    for (const auto& jf : doc.value("firmware", json::array())) {
        FirmwareRun f;
        f.name = jf.value("name", "");
        f.root = jf.value("root", "");
        f.stages = stages_from(jf.value("stages", json::array()));
        for (const auto& jk : jf.value("kernels", json::array())) {
            KernelRun k;
            if (auto v = parse_release(jk.value("version", ""))) k.version = *v;
            k.kernel_file = jk.value("kernel_file", "");
            k.config_file = jk.value("config_file", "");
            k.stages = stages_from(jk.value("stages", json::array()));
            k.report_path = jk.value("report", "");
            f.kernels.push_back(std::move(k));
        }
        for (const auto& w : jf.value("warnings", json::array())) f.warnings.push_back(w.get<std::string>());
        run.firmware.push_back(std::move(f));
    }
    for (const auto& r : doc.value("reports", json::array())) run.reports.emplace_back(r.get<std::string>());
    if (doc.contains("corpus_summary") && doc["corpus_summary"].is_string())
        run.corpus_summary = doc["corpus_summary"].get<std::string>();
    return run;
}

ApplicabilityStats applicability_stats(const PipelineRun& run, const NvdSnapshot& snapshot) {
    ApplicabilityStats s;
    s.firmware = run.firmware.size();
    auto passed = [](const FirmwareRun& f, std::string_view stage) {
        const StageOutcome* o = f.stage(stage);
        return o && o->status == StageStatus::succeeded;
    };
    for (const auto& f : run.firmware) {
        s.extracted += passed(f, "extract");
        s.with_version += passed(f, "version");
        s.with_arch += passed(f, "arch");
        s.with_config += passed(f, "config");
    }
    auto frac = [](std::size_t n, std::size_t d) { return d ? static_cast<double>(n) / static_cast<double>(d) : 0.0; };
    s.extracted_fraction = frac(s.extracted, s.firmware);
    s.version_fraction = frac(s.with_version, s.firmware);
    s.arch_fraction = frac(s.with_arch, s.firmware);
    s.config_fraction = frac(s.with_config, s.firmware);

    s.records = snapshot.records.size();
    for (const auto& r : snapshot.records) {
        switch (reference_class(r)) {
            case RefClass::full_path: ++s.full_path; break;
            case RefClass::file_only: ++s.file_only; break;
            case RefClass::no_reference: ++s.no_reference; break;
        }
    }
    s.full_path_fraction = frac(s.full_path, s.records);
    s.file_only_fraction = frac(s.file_only, s.records);
    s.no_reference_fraction = frac(s.no_reference, s.records);
    return s;
}

std::string to_json(const ApplicabilityStats& s) {
    json doc = {
        {"firmware_coverage",
         {{"firmware", s.firmware},
          {"extracted", {{"count", s.extracted}, {"fraction", s.extracted_fraction}}},
          {"kernel_version", {{"count", s.with_version}, {"fraction", s.version_fraction}}},
          {"isa", {{"count", s.with_arch}, {"fraction", s.arch_fraction}}},
          {"kernel_configuration", {{"count", s.with_config}, {"fraction", s.config_fraction}}}}},
        {"reference_classes",
         {{"records", s.records},
          {"full_path", {{"count", s.full_path}, {"fraction", s.full_path_fraction}}},
          {"file_only", {{"count", s.file_only}, {"fraction", s.file_only_fraction}}},
          {"no_reference", {{"count", s.no_reference}, {"fraction", s.no_reference_fraction}}}}},
    };
    return doc.dump(2) + "\n";
}

}  // namespace kcve
