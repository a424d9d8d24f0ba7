#include "kcve/mime.hpp"
#include "kcve/codec.hpp"

#include <algorithm>
#include <array>
#include <filesystem>

namespace kcve {

namespace {

constexpr std::size_t kTextWindow = 8192;

bool at(ByteView d, std::size_t off, std::string_view magic) {
    if (d.size() < off + magic.size()) return false;
    return std::equal(magic.begin(), magic.end(), d.begin() + static_cast<std::ptrdiff_t>(off),
                      [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; });
}

std::string_view elf_mime(ByteView d) {
    if (d.size() < 18) return mime::kOctet;
    bool be = d[5] == 2;
    switch (load_u16(d, 16, be)) {
        case 1: return mime::kElfObject;
        case 2: return mime::kElfExec;
        case 3: return mime::kElfShared;
        case 4: return mime::kElfCore;
        default: return mime::kOctet;
    }
}

// Printable ASCII, common whitespace, and well-formed UTF-8 sequences.
bool looks_like_text(ByteView d) {
    ByteView w = d.first(std::min(d.size(), kTextWindow));
    std::size_t good = 0;
    for (std::size_t i = 0; i < w.size();) {
        std::uint8_t c = w[i];
        if (c == 0) return false;
        if ((c >= 0x20 && c < 0x7f) || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == 0x1b) {
            ++good;
            ++i;
            continue;
        }
        std::size_t len = (c & 0xe0) == 0xc0 ? 2 : (c & 0xf0) == 0xe0 ? 3 : (c & 0xf8) == 0xf0 ? 4 : 0;
        bool ok = len > 0;
        for (std::size_t k = 1; ok && k < len; ++k)
            ok = i + k < w.size() ? (w[i + k] & 0xc0) == 0x80 : true;  // cut at window edge
        if (ok) {
            good += len;
            i += len;
        } else {
            ++i;
        }
    }
    return good * 100 >= w.size() * 95;
}

bool text_extension(std::string_view filename) {
    static constexpr std::array<std::string_view, 10> exts = {
        ".txt", ".config", ".cfg", ".conf", ".sh", ".xml", ".json", ".html", ".htm", ".ini"};
    std::string ext = std::filesystem::path(filename).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return std::find(exts.begin(), exts.end(), ext) != exts.end();
}

}  // namespace

std::string sniff_mime(ByteView d, std::string_view filename) {
    if (d.empty()) return std::string(mime::kEmpty);
    if (at(d, 0, "\x7f" "ELF")) return std::string(elf_mime(d));
    if (at(d, 0, "\xd0\x0d\xfe\xed")) return std::string(mime::kDeviceTree);
    if (at(d, 0, "\x27\x05\x19\x56")) return std::string(mime::kUImage);
    if (d.size() >= 0x34 && load_u32(d, 0x24, false) == 0x016f2818)
        return std::string(load_u32(d, 0x30, false) == 0x01020304 ? mime::kZImageArmBe : mime::kZImageArm);
    if (at(d, 0x38, "ARM\x64")) return std::string(mime::kImageArm64);
    if (at(d, 0x1fe, "\x55\xaa") && at(d, 0x202, "HdrS")) return std::string(mime::kBzImage);
    if (at(d, 0, "bFLT")) return std::string(mime::kBflt);

    if (has_signature(Compression::gzip, d)) return std::string(mime::kGzip);
    if (has_signature(Compression::xz, d)) return std::string(mime::kXz);
    if (has_signature(Compression::bzip2, d)) return std::string(mime::kBzip2);
    if (has_signature(Compression::zstd, d)) return std::string(mime::kZstd);
    if (has_signature(Compression::lz4, d)) return std::string(mime::kLz4);
    if (d[0] == 0x5d && has_signature(Compression::lzma, d)) return std::string(mime::kLzma);

    if (at(d, 0, "070701") || at(d, 0, "070702") || at(d, 0, "070707") || at(d, 0, "\xc7\x71") ||
        at(d, 0, "\x71\xc7"))
        return std::string(mime::kCpio);
    if (at(d, 0, "\xff\xd8\xff")) return "image/jpeg";
    if (at(d, 0, "\x89PNG\r\n\x1a\n")) return "image/png";
    if (at(d, 0, "GIF87a") || at(d, 0, "GIF89a")) return "image/gif";
    if (at(d, 0, "%PDF-")) return "application/pdf";
    if (at(d, 0, "PK\x03\x04")) return "application/zip";
    if (at(d, 0, "hsqs") || at(d, 0, "sqsh")) return "application/x-squashfs";

    if (looks_like_text(d)) return std::string(at(d, 0, "#!") ? mime::kShell : mime::kText);
    bool has_nul = std::find(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(std::min(d.size(), kTextWindow)),
                             0) != d.begin() + static_cast<std::ptrdiff_t>(std::min(d.size(), kTextWindow));
    if (!has_nul && text_extension(filename)) return std::string(mime::kText);
    return std::string(mime::kOctet);
}

bool is_text_mime(std::string_view m) { return m.starts_with("text/"); }

bool is_compressed_mime(std::string_view m) {
    return m == mime::kGzip || m == mime::kXz || m == mime::kBzip2 || m == mime::kLzma ||
           m == mime::kLz4 || m == mime::kZstd;
}

bool is_kernel_image_mime(std::string_view m) {
    return m == mime::kUImage || m == mime::kZImageArm || m == mime::kZImageArmBe ||
           m == mime::kImageArm64 || m == mime::kBzImage;
}

}  // namespace kcve
