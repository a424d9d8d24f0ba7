#include "kcve/version.hpp"
#include "kcve/errors.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>

namespace kcve {

namespace {

constexpr std::string_view kPrefix = "linux version ";

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_suffix_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::size_t digit_run(std::string_view s, std::size_t pos, std::size_t max) {
    std::size_t n = 0;
    while (n < max && pos + n < s.size() && is_digit(s[pos + n])) ++n;
    return n;
}

unsigned to_uint(std::string_view digits) {
    unsigned v = 0;
    std::from_chars(digits.data(), digits.data() + digits.size(), v);
    return v;
}

}  // namespace

std::string KernelVersion::numeric() const {
    return fmt::format("{}.{}.{}", major, minor, patch);
}

std::string KernelVersion::to_string() const { return numeric() + suffix; }

std::size_t match_version_signature(std::string_view text, std::size_t pos) {
    if (pos > text.size() || text.size() - pos < kPrefix.size() + 5) return 0;
    for (std::size_t i = 0; i < kPrefix.size(); ++i)
        if (lower(text[pos + i]) != kPrefix[i]) return 0;
    std::size_t p = pos + kPrefix.size();

    if (!is_digit(text[p]) || p + 1 >= text.size() || text[p + 1] != '.') return 0;
    p += 2;
    std::size_t minor = digit_run(text, p, 2);
    if (minor == 0 || p + minor >= text.size() || text[p + minor] != '.') return 0;
    p += minor + 1;
    std::size_t patch = digit_run(text, p, 3);
    if (patch == 0) return 0;
    p += patch;

    if (p + 1 < text.size() && text[p] == '-' && is_suffix_char(text[p + 1])) {
        ++p;
        while (p < text.size() && is_suffix_char(text[p])) ++p;
    }
    return p - pos;
}

KernelVersion parse_kernel_version(std::string_view raw) {
    std::size_t len = match_version_signature(raw, 0);
    if (len == 0) {
        // Report the first token that breaks the pattern.
        std::size_t i = 0;
        while (i < kPrefix.size() && i < raw.size() && lower(raw[i]) == kPrefix[i]) ++i;
        std::string_view rest = raw.substr(i);
        auto end = rest.find(' ');
        std::string token(rest.substr(0, end));
        if (i < kPrefix.size()) token = std::string(raw.substr(0, raw.find(' ', i)));
        throw ParseError(fmt::format("not a kernel version banner: offending token '{}'", token));
    }
    if (len != raw.size())
        throw ParseError(fmt::format("trailing text after kernel version: offending token '{}'",
                                     raw.substr(len)));

    KernelVersion v;
    std::string_view body = raw.substr(kPrefix.size());
    auto d1 = body.find('.');
    auto d2 = body.find('.', d1 + 1);
    v.major = to_uint(body.substr(0, d1));
    v.minor = to_uint(body.substr(d1 + 1, d2 - d1 - 1));
    std::size_t patch_len = digit_run(body, d2 + 1, 3);
    v.patch = to_uint(body.substr(d2 + 1, patch_len));
    v.suffix = std::string(body.substr(d2 + 1 + patch_len));
    return v;
}

std::optional<KernelVersion> parse_release(std::string_view text) {
    auto number = [&](std::size_t& p, unsigned& out) {
        std::size_t n = digit_run(text, p, 9);
        if (n == 0) return false;
        out = to_uint(text.substr(p, n));
        p += n;
        return true;
    };
    KernelVersion v;
    std::size_t p = 0;
    if (!number(p, v.major)) return std::nullopt;
    if (p >= text.size() || text[p] != '.') return std::nullopt;
    ++p;
    if (!number(p, v.minor)) return std::nullopt;
    if (p + 1 < text.size() && text[p] == '.' && is_digit(text[p + 1])) {
        ++p;
        number(p, v.patch);
    }
    v.suffix = std::string(text.substr(p));
    return v;
}

}  // namespace kcve
