#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace kcve {

/// Dotted kernel release "X.Y.Z" plus an optional local-version suffix such
/// as "-rc3" or "-g12ab". Comparison and ordering use the numeric triple only;
/// use `same_build` when the suffix matters.
struct KernelVersion {
    unsigned major = 0;
    unsigned minor = 0;
    unsigned patch = 0;
    std::string suffix;

    std::string to_string() const;
    /// "X.Y.Z" without the suffix.
    std::string numeric() const;

    friend bool operator==(const KernelVersion& a, const KernelVersion& b) noexcept {
        return a.major == b.major && a.minor == b.minor && a.patch == b.patch;
    }
    friend std::strong_ordering operator<=>(const KernelVersion& a,
                                            const KernelVersion& b) noexcept {
        if (auto c = a.major <=> b.major; c != 0) return c;
        if (auto c = a.minor <=> b.minor; c != 0) return c;
        return a.patch <=> b.patch;
    }
};

inline bool same_build(const KernelVersion& a, const KernelVersion& b) {
    return a == b && a.suffix == b.suffix;
}

/// Strict weak order over (major, minor, patch, suffix), for deduplication.
struct ExactVersionLess {
    bool operator()(const KernelVersion& a, const KernelVersion& b) const {
        if (auto c = a <=> b; c != 0) return c < 0;
        return a.suffix < b.suffix;
    }
};

/// Parses a complete kernel banner match such as "Linux version 4.9.60-g1a".
/// The prefix is matched case-insensitively. Throws ParseError naming the
/// offending token when the text is not exactly one signature match.
KernelVersion parse_kernel_version(std::string_view raw);

/// Parses a bare release string as used by NVD/CPE ("4.9", "4.9.71",
/// "2.6.32.27", "3.0-rc1"). Missing patch defaults to 0; anything after the
/// numeric triple is kept as suffix.
std::optional<KernelVersion> parse_release(std::string_view text);

/// Length of the kernel version signature starting at `pos` of `text`, or 0
/// when there is no match there. Matches the pattern
///   Linux version \d\.\d{1,2}\.\d{1,3}(-[\w.-]+)?
/// case-insensitively, greedily, with regex backtracking semantics.
std::size_t match_version_signature(std::string_view text, std::size_t pos);

}  // namespace kcve
