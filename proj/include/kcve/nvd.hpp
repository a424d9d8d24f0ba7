#pragma once

#include "kcve/diagnostics.hpp"
#include "kcve/version.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kcve {

struct VersionBound {
    KernelVersion version;
    bool inclusive = true;
    friend bool operator==(const VersionBound&, const VersionBound&) = default;
};

/// Either an exact release or a (half-)open range. A missing bound is
/// unbounded on that side. Comparison uses (major, minor, patch) only.
struct VersionConstraint {
    std::optional<KernelVersion> exact;
    std::optional<VersionBound> start;
    std::optional<VersionBound> end;

    bool valid() const { return exact ? !start && !end : start || end; }
    bool admits(const KernelVersion& v) const;
    std::string to_string() const;
};

enum class RefKind { full_path, file_only };

std::string_view to_string(RefKind k);

struct FileRef {
    std::string raw;
    RefKind kind = RefKind::file_only;
    std::string normalized;

    bool is_header() const { return normalized.ends_with(".h"); }
    std::string_view basename() const;
    std::string_view directory() const;  // empty for file-only refs and top-level files
    friend bool operator==(const FileRef&, const FileRef&) = default;
};

/// Source-file references in a description: maximal runs of
/// [A-Za-z0-9_./-] with trailing '.' and '-' trimmed, ending in .c, .h or
/// .S. Tokens with '/' are full-path refs with any leading "./", "/",
/// "linux/" or "linux-<version>/" removed. First occurrence order, no
/// duplicates.
std::vector<FileRef> extract_file_refs(std::string_view description);

struct CveRecord {
    std::string id;
    std::string description;
    std::vector<VersionConstraint> constraints;
    std::vector<FileRef> file_refs;  // always extract_file_refs(description)
    std::string published;
    std::string modified;
};

/// Whether a record names full paths, only basenames, or no file at all.
enum class RefClass { full_path, file_only, no_reference };

std::string_view to_string(RefClass c);
RefClass reference_class(const CveRecord& r);

bool is_valid_cve_id(std::string_view id);

struct NvdSnapshot {
    std::vector<CveRecord> records;  // sorted by id
    std::string snapshot_date;
    std::string source;  // feed file names / identity
    std::string schema;  // "nvd-json-2.0", "nvd-json-1.1" or both
};

struct IngestStats {
    std::size_t items = 0;
    std::size_t kernel_records = 0;
    std::size_t dropped_unconstrained = 0;  // kernel CPE but no usable version data
    std::size_t skipped_cpes = 0;
};

/// Parses one NVD JSON document: API 2.0 (`vulnerabilities`) or the 1.1
/// data feed (`CVE_Items`). Keeps records with a vulnerable
/// cpe:2.3:o:linux:linux_kernel match. Throws SchemaError with a path
/// into the document on structural violations; malformed CPE entries are
/// skipped with a warning.
NvdSnapshot ingest_nvd_feed(std::string_view json, std::string source = {}, Diagnostics* diag = nullptr,
                            IngestStats* stats = nullptr);

/// Reads a dump file (gzip-compressed or plain) and ingests it.
NvdSnapshot ingest_nvd_file(const std::filesystem::path& path, Diagnostics* diag = nullptr,
                            IngestStats* stats = nullptr);

/// Dump files in `paths` merged; for a CVE present twice the later
/// lastModified wins. A directory contributes its *.json and *.json.gz.
NvdSnapshot ingest_nvd_paths(const std::vector<std::filesystem::path>& paths, Diagnostics* diag = nullptr);

bool version_matches(const std::vector<VersionConstraint>& constraints, const KernelVersion& v);

/// Records admitting `v`, in id order.
std::vector<CveRecord> version_filter(const NvdSnapshot& snapshot, const KernelVersion& v);

/// Compact cache form; file refs are re-derived on load.
std::string serialize_snapshot(const NvdSnapshot& snapshot);
NvdSnapshot deserialize_snapshot(std::string_view json);
void save_snapshot(const NvdSnapshot& snapshot, const std::filesystem::path& path);
NvdSnapshot load_snapshot(const std::filesystem::path& path);

/// Orders CVE ids by year then sequence number.
bool cve_id_less(std::string_view a, std::string_view b);

}  // namespace kcve
