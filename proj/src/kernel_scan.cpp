#include "kcve/kernel_scan.hpp"
#include "kcve/errors.hpp"
#include "kcve/mime.hpp"
#include "parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <set>
#include <system_error>

namespace fs = std::filesystem;

namespace kcve {

namespace {

void scan_narrow(std::string_view text, std::vector<VersionHit>& out, std::uint64_t base,
                 std::uint64_t stride, TextEncoding enc) {
    for (std::size_t i = 0; i < text.size();) {
        char c = text[i];
        if (c != 'l' && c != 'L') {
            ++i;
            continue;
        }
        std::size_t len = match_version_signature(text, i);
        if (len == 0) {
            ++i;
            continue;
        }
        VersionHit h;
        h.offset = base + i * stride;
        h.raw = std::string(text.substr(i, len));
        h.version = parse_kernel_version(h.raw);
        h.encoding = enc;
        out.push_back(std::move(h));
        i += len;
    }
}

bool may_contain_wide(ByteView blob) {
    using namespace std::string_view_literals;
    return find_bytes(blob, "x\0 \0"sv).has_value() || find_bytes(blob, "X\0 \0"sv).has_value();
}

}  // namespace

std::vector<VersionHit> scan_file_for_kernel_version(ByteView blob, std::string_view mime) {
    std::vector<VersionHit> hits;
    if (is_text_mime(mime) || blob.empty()) return hits;

    scan_narrow(as_chars(blob), hits, 0, 1, TextEncoding::ascii);

    if (may_contain_wide(blob)) {
        std::string narrow;
        for (std::size_t parity = 0; parity < 2; ++parity) {
            if (blob.size() < parity + 2) continue;
            std::size_t n = (blob.size() - parity) / 2;
            narrow.assign(n, '\0');
            for (std::size_t k = 0; k < n; ++k) {
                std::uint8_t lo = blob[parity + 2 * k];
                std::uint8_t hi = blob[parity + 2 * k + 1];
                narrow[k] = hi == 0 ? static_cast<char>(lo) : '\0';
            }
            scan_narrow(narrow, hits, parity, 2, TextEncoding::utf16le);
        }
    }

    std::sort(hits.begin(), hits.end(),
              [](const VersionHit& a, const VersionHit& b) { return a.offset < b.offset; });
    return hits;
}

std::vector<std::string> list_regular_files(const fs::path& root, Diagnostics* diag) {
    std::error_code ec;
    auto st = fs::symlink_status(root, ec);
    if (ec) throw Error(fmt::format("cannot read {}: {}", root.string(), ec.message()));
    if (fs::is_regular_file(st)) return {root.filename().generic_string()};
    if (!fs::is_directory(st)) throw Error(fmt::format("{} is neither a file nor a directory", root.string()));

    std::vector<std::string> files;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) throw Error(fmt::format("cannot read {}: {}", root.string(), ec.message()));
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            warn(diag, fmt::format("directory walk: {}", ec.message()));
            ec.clear();
            continue;
        }
        std::error_code sec;
        auto s = it->symlink_status(sec);
        if (sec || !fs::is_regular_file(s)) continue;
        files.push_back(fs::relative(it->path(), root, sec).generic_string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

FirmwareInventory scan_tree(const fs::path& root, const ScanOptions& options) {
    FirmwareInventory inv;
    inv.root = root;
    Diagnostics walk_diag;
    auto files = list_regular_files(root, &walk_diag);
    bool single = fs::is_regular_file(fs::symlink_status(root));

    struct Slot {
        std::string mime;
        std::vector<VersionHit> hits;
        std::string warning;
    };
    std::vector<Slot> slots(files.size());

    detail::parallel_for(files.size(), options.workers, [&](std::size_t i) {
        fs::path p = single ? root : root / files[i];
        Slot& slot = slots[i];
        try {
            std::error_code ec;
            auto size = fs::file_size(p, ec);
            if (ec) {
                slot.warning = fmt::format("{}: {}", files[i], ec.message());
                return;
            }
            if (size > options.max_file_size) {
                slot.warning = fmt::format("{}: skipped, {} bytes exceeds limit of {}", files[i], size,
                                           options.max_file_size);
                return;
            }
            Bytes blob = read_file(p);
            slot.mime = sniff_mime(blob, files[i]);
            slot.hits = scan_file_for_kernel_version(blob, slot.mime);
            for (auto& h : slot.hits) h.path = files[i];
        } catch (const std::exception& e) {
            slot.warning = fmt::format("{}: {}", files[i], e.what());
        }
    });

    inv.warnings = walk_diag.warnings();
    std::set<KernelVersion, ExactVersionLess> versions;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!slots[i].warning.empty()) inv.warnings.push_back(slots[i].warning);
        if (!slots[i].mime.empty()) inv.mime_types[files[i]] = slots[i].mime;
        for (auto& h : slots[i].hits) {
            versions.insert(h.version);
            inv.hits.push_back(std::move(h));
        }
    }
    inv.distinct_versions.assign(versions.begin(), versions.end());
    return inv;
}

}  // namespace kcve
