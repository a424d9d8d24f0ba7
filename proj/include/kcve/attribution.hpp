#pragma once

#include "kcve/arch.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/nvd.hpp"
#include "kcve/version.hpp"
#include "kcve/witness.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace kcve {

enum class VerdictClass { applicable_high, not_applicable_high, applicable_medium, applicable_low };

inline constexpr std::array kVerdictClasses = {
    VerdictClass::applicable_high,
    VerdictClass::not_applicable_high,
    VerdictClass::applicable_medium,
    VerdictClass::applicable_low,
};

std::string_view to_string(VerdictClass c);
std::optional<VerdictClass> verdict_class_from_string(std::string_view s);
inline std::size_t index_of(VerdictClass c) { return static_cast<std::size_t>(c); }

// Rules that can justify a verdict.
namespace rule {
inline constexpr std::string_view kFullPath = "full-path";
inline constexpr std::string_view kBasename = "basename";
inline constexpr std::string_view kHeaderDirectory = "header-directory";
}  // namespace rule

// Flags marking verdicts that rest on this tool's own matching policy
// rather than on a direct witness.
namespace policy {
inline constexpr std::string_view kHeaderDirectory = "header-directory-match";
inline constexpr std::string_view kMixedRefs = "mixed-refs-basename";
inline constexpr std::string_view kFileOnlyHeader = "file-only-header-unmatchable";
inline constexpr std::string_view kFullPathBasenameIgnored = "full-path-basename-collision-ignored";
}  // namespace policy

struct RefEvidence {
    FileRef ref;
    std::string rule;
    std::vector<std::string> witnessed;  // sorted
};

struct Verdict {
    VerdictClass cls = VerdictClass::applicable_low;
    std::vector<RefEvidence> matched_refs;
    std::vector<std::string> policy_flags;
};

/// Priority order: a witnessed full-path source ref gives ApplicableHigh;
/// no refs gives ApplicableLow; a file-only ref whose basename is
/// witnessed, or a full-path header whose directory holds a witnessed
/// source, gives ApplicableMedium; anything else is NotApplicableHigh.
Verdict classify(const CveRecord& record, const WitnessSet& witnesses);

struct AttributionContext {
    std::string firmware;
    std::string kernel_file;  // file the version banner came from
    KernelVersion kernel;
    ArchVerdict arch;
    ConfigSource config_source = ConfigSource::plaintext;
    std::string config_origin;
    std::size_t config_options = 0;
    std::string kernel_source_url;
    std::string kernel_source_sha256;
    std::string nvd_snapshot_date;
    std::string nvd_source;
    std::size_t witnessed_files = 0;
    std::string tool_version;
};

struct CveVerdict {
    CveRecord record;
    Verdict verdict;
    bool filtered_out() const { return verdict.cls == VerdictClass::not_applicable_high; }
};

struct AttributionReport {
    AttributionContext context;
    std::vector<CveVerdict> verdicts;  // ordered by CVE id
    std::array<std::size_t, 4> counts{};
    std::array<double, 4> fractions{};
    std::vector<std::string> policy_flags;  // union over verdicts, sorted

    std::size_t candidates() const { return verdicts.size(); }
};

AttributionReport attribute(std::vector<CveRecord> candidates, const WitnessSet& witnesses,
                            AttributionContext context);

/// Machine-readable report, byte-stable for identical inputs.
std::string to_canonical_json(const AttributionReport& report);
/// One row per CVE: id, verdict, filtered, refs, evidence.
std::string to_tabular(const AttributionReport& report);
/// Reads the summary and verdict list back from to_canonical_json output.
AttributionReport report_from_json(std::string_view json);

struct CorpusStats {
    std::size_t reports = 0;
    std::size_t excluded_empty = 0;  // reports with no candidates
    std::array<double, 4> medians{};
    std::vector<std::string> firmware;
    std::vector<std::array<double, 4>> per_report;
};

/// Lower median of each class fraction over the non-empty reports.
/// Throws PreconditionError for an empty list or when every report is empty.
CorpusStats summarize_corpus(const std::vector<AttributionReport>& reports);

std::string to_json(const CorpusStats& stats);

}  // namespace kcve
