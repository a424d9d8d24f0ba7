#pragma once

#include "kcve/bytes.hpp"
#include "kcve/diagnostics.hpp"
#include "kcve/version.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kcve {

enum class TextEncoding { ascii, utf16le };

/// One kernel version banner found in a file.
///
/// `raw` is the matched text ("Linux version 4.9.60 ..."). For utf16le hits
/// it is the decoded ASCII and the match spans `byte_length()` bytes, twice
/// its character count.
struct VersionHit {
    std::string path;
    std::uint64_t offset = 0;
    KernelVersion version;
    std::string raw;
    TextEncoding encoding = TextEncoding::ascii;

    std::uint64_t byte_length() const {
        return encoding == TextEncoding::ascii ? raw.size() : raw.size() * 2;
    }
};

struct FirmwareInventory {
    std::filesystem::path root;
    std::vector<VersionHit> hits;                         // sorted by (path, offset)
    std::vector<KernelVersion> distinct_versions;         // sorted, exact dedup
    std::map<std::string, std::string> mime_types;        // relative path -> media type
    std::vector<std::string> warnings;
};

/// Every non-overlapping kernel version banner in `blob`, ASCII and
/// UTF-16LE, in ascending offset order. Text media types never match.
std::vector<VersionHit> scan_file_for_kernel_version(ByteView blob, std::string_view mime);

struct ScanOptions {
    std::uint64_t max_file_size = std::uint64_t{512} << 20;
    unsigned workers = 0;  // 0: hardware concurrency
};

/// Scans every regular file below `root` (symlinks are not followed), or
/// `root` itself when it is a file. Throws kcve::Error when root cannot be
/// read; per-file problems are recorded as warnings.
FirmwareInventory scan_tree(const std::filesystem::path& root, const ScanOptions& options = {});

/// Regular files below `root` as sorted root-relative paths (generic form).
std::vector<std::string> list_regular_files(const std::filesystem::path& root,
                                            Diagnostics* diag = nullptr);

}  // namespace kcve
