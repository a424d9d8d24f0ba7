#include "kcve/arch.hpp"
#include "kcve/errors.hpp"
#include "kcve/mime.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <sstream>
#include <tuple>

namespace kcve {

namespace detail {
extern const std::string_view kDefaultArchTables;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

ArchMapping parse_mapping(std::span<const std::string_view> f, std::size_t lineno) {
    auto fail = [&](std::string_view what) {
        return ParseError(fmt::format("arch tables line {}: {}", lineno, what));
    };
    ArchMapping m;
    if (f[0] != "-") m.family = std::string(f[0]);
    if (f[1] == "32") m.bits = 32;
    else if (f[1] == "64") m.bits = 64;
    else if (f[1] != "-") throw fail(fmt::format("bad bit width '{}'", f[1]));
    if (f[2] == "little") m.endianness = Endianness::little;
    else if (f[2] == "big") m.endianness = Endianness::big;
    else if (f[2] != "-") throw fail(fmt::format("bad endianness '{}'", f[2]));
    return m;
}

ArchGuess guess_from(const ArchMapping& m, Evidence ev, std::string variant) {
    ArchGuess g;
    g.family = m.family;
    g.bits = m.bits;
    g.endianness = m.endianness;
    g.evidence = ev;
    g.variant = std::move(variant);
    return g;
}

bool rule_fires(const DirectiveRule& r, const KernelConfig& config) {
    const ConfigValue* v = config.find(r.name);
    if (!v) return false;
    switch (r.when) {
        case DirectiveRule::When::set: return true;
        case DirectiveRule::When::enabled: return v->enabled();
        case DirectiveRule::When::disabled: return v->kind == ValueKind::no;
    }
    return false;
}

// Value with a strict plurality among `values` (zero entries ignored).
template <typename T>
T plurality(const std::vector<T>& values, T none) {
    std::map<T, int> counts;
    for (const T& v : values)
        if (v != none) ++counts[v];
    T best = none;
    int best_n = 0;
    bool tie = false;
    for (const auto& [v, n] : counts) {
        if (n > best_n) {
            best = v;
            best_n = n;
            tie = false;
        } else if (n == best_n) {
            tie = true;
        }
    }
    return tie ? none : best;
}

}  // namespace

std::string_view to_string(Endianness e) {
    switch (e) {
        case Endianness::little: return "little";
        case Endianness::big: return "big";
        case Endianness::unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Evidence e) {
    switch (e) {
        case Evidence::mime: return "mime";
        case Evidence::config_directive: return "config-directive";
        case Evidence::device_tree: return "device-tree";
        case Evidence::elf_header: return "elf-header";
    }
    return "unknown";
}

ArchTables parse_arch_tables(std::string_view text) {
    ArchTables t;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    bool seen_format = false;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto f = split_ws(line);
        if (f.empty()) continue;
        auto fail = [&](std::string_view what) {
            return ParseError(fmt::format("arch tables line {}: {}", lineno, what));
        };
        std::string_view kind = f[0];
        if (kind == "format") {
            if (f.size() != 2 || f[1] != "1") throw fail("unsupported format, expected 'format 1'");
            seen_format = true;
            continue;
        }
        if (!seen_format) throw fail("'format' line must precede mappings");
        if (kind == "directive") {
            if (f.size() != 6) throw fail("directive needs 5 fields");
            DirectiveRule r;
            r.name = std::string(f[1]);
            if (f[2] == "set") r.when = DirectiveRule::When::set;
            else if (f[2] == "y") r.when = DirectiveRule::When::enabled;
            else if (f[2] == "n") r.when = DirectiveRule::When::disabled;
            else throw fail(fmt::format("bad directive condition '{}'", f[2]));
            r.mapping = parse_mapping(std::span(f).subspan(3), lineno);
            t.directives.push_back(std::move(r));
        } else if (kind == "compatible" || kind == "compatible-prefix" || kind == "mime" || kind == "uimage-arch") {
            if (f.size() != 5) throw fail(fmt::format("{} needs 4 fields", kind));
            ArchMapping m = parse_mapping(std::span(f).subspan(2), lineno);
            if (kind == "compatible") {
                t.compatible.insert_or_assign(std::string(f[1]), m);
            } else if (kind == "compatible-prefix") {
                t.compatible_prefix.emplace_back(std::string(f[1]), m);
            } else if (kind == "mime") {
                t.mime.insert_or_assign(std::string(f[1]), m);
            } else {
                std::uint32_t code = 0;
                auto [p, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), code);
                if (ec != std::errc{} || p != f[1].data() + f[1].size())
                    throw fail(fmt::format("bad uimage-arch code '{}'", f[1]));
                t.uimage_arch.insert_or_assign(code, m);
            }
        } else {
            throw fail(fmt::format("unknown entry kind '{}'", kind));
        }
    }
    if (!seen_format) throw ParseError("arch tables: missing 'format' line");
    return t;
}

ArchTables load_arch_tables(const std::filesystem::path& path) {
    return parse_arch_tables(read_text_file(path));
}

const ArchTables& ArchTables::builtin() {
    static const ArchTables tables = parse_arch_tables(detail::kDefaultArchTables);
    return tables;
}

std::optional<ArchGuess> detect_from_config(const KernelConfig& config, const ArchTables& tables) {
    ArchMapping acc;
    std::vector<std::string> fired;
    for (const auto& r : tables.directives) {
        if (!rule_fires(r, config)) continue;
        if (!r.mapping.family.empty()) acc.family = r.mapping.family;
        if (r.mapping.bits) acc.bits = r.mapping.bits;
        if (r.mapping.endianness != Endianness::unknown) acc.endianness = r.mapping.endianness;
        if (fired.empty() || fired.back() != r.name) fired.push_back(r.name);
    }
    if (acc.family.empty()) return std::nullopt;
    std::string variant;
    for (const auto& n : fired) variant += (variant.empty() ? "" : " ") + n;
    return guess_from(acc, Evidence::config_directive, std::move(variant));
}

std::optional<ArchGuess> detect_from_mime(ByteView blob, std::string_view mime, const ArchTables& tables) {
    if (mime == mime::kUImage && blob.size() >= 64) {
        std::uint32_t code = blob[29];
        if (auto it = tables.uimage_arch.find(code); it != tables.uimage_arch.end() && !it->second.family.empty())
            return guess_from(it->second, Evidence::mime, fmt::format("uImage ih_arch {}", code));
        return std::nullopt;
    }
    auto it = tables.mime.find(mime);
    if (it == tables.mime.end() || it->second.family.empty()) return std::nullopt;
    ArchGuess g = guess_from(it->second, Evidence::mime, std::string(mime));
    if (mime == mime::kImageArm64 && blob.size() >= 0x40 &&
        (load_u32(blob, 0x10, false) | load_u32(blob, 0x14, false)) != 0) {
        // flags bit 0 is the kernel endianness; only meaningful once
        // image_size is filled in (header v0.1)
        g.endianness = load_u32(blob, 0x18, false) & 1 ? Endianness::big : Endianness::little;
    } else if (mime == mime::kBzImage && blob.size() >= 0x238) {
        std::uint16_t protocol = load_u16(blob, 0x206, false);
        if (protocol >= 0x020c && (load_u16(blob, 0x236, false) & 1)) {
            g.family = family::kX86_64;
            g.bits = 64;
        }
    }
    return g;
}

ArchVerdict consolidate(std::vector<ArchGuess> guesses) {
    ArchVerdict v;
    std::sort(guesses.begin(), guesses.end(), [](const ArchGuess& a, const ArchGuess& b) {
        return std::tie(b.evidence, a.family, a.bits, a.endianness, a.variant, a.file) <
               std::tie(a.evidence, b.family, b.bits, b.endianness, b.variant, b.file);
    });
    v.guesses = guesses;
    if (guesses.empty()) return v;

    Evidence top = guesses.front().evidence;
    std::vector<std::string> families;
    for (const auto& g : guesses)
        if (g.evidence == top) families.push_back(g.family);
    std::string fam = plurality<std::string>(families, "");
    if (fam.empty()) return v;

    std::vector<unsigned> bits;
    std::vector<Endianness> endian, lower_endian;
    for (const auto& g : guesses) {
        if (g.family != fam) continue;
        if (g.evidence == top) {
            bits.push_back(g.bits);
            endian.push_back(g.endianness);
        } else {
            lower_endian.push_back(g.endianness);
        }
    }
    ResolvedArch r;
    r.family = fam;
    r.bits = plurality<unsigned>(bits, 0);
    r.endianness = plurality(endian, Endianness::unknown);
    if (r.endianness == Endianness::unknown) r.endianness = plurality(lower_endian, Endianness::unknown);
    v.resolved = r;
    return v;
}

std::optional<std::string> kernel_arch_name(std::string_view fam) {
    if (fam == family::kMips) return "mips";
    if (fam == family::kArm) return "arm";
    if (fam == family::kAarch64) return "arm64";
    if (fam == family::kX86 || fam == family::kX86_64) return "x86";
    if (fam == family::kPowerPc) return "powerpc";
    if (fam == "RISC-V") return "riscv";
    return std::nullopt;
}

}  // namespace kcve
