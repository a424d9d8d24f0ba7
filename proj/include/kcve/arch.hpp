#pragma once

#include "kcve/bytes.hpp"
#include "kcve/diagnostics.hpp"
#include "kcve/kconfig.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kcve {

// Family names used by the built-in tables. Anything else is carried
// through verbatim as an "other" family.
namespace family {
inline constexpr std::string_view kMips = "MIPS";
inline constexpr std::string_view kArm = "ARM";
inline constexpr std::string_view kAarch64 = "AArch64";
inline constexpr std::string_view kX86 = "x86";
inline constexpr std::string_view kX86_64 = "x86-64";
inline constexpr std::string_view kPowerPc = "PowerPC";
}  // namespace family

enum class Endianness { unknown, little, big };

// Declared in ascending confidence.
enum class Evidence { mime, config_directive, device_tree, elf_header };

std::string_view to_string(Endianness e);
std::string_view to_string(Evidence e);

struct ArchGuess {
    std::string family;
    unsigned bits = 0;  // 0: unknown
    Endianness endianness = Endianness::unknown;
    Evidence evidence = Evidence::mime;
    std::string variant;  // e.g. "mips32r2 o32", or the matched directive
    std::string file;     // where the evidence came from, when known

    int confidence() const { return static_cast<int>(evidence); }
    friend bool operator==(const ArchGuess&, const ArchGuess&) = default;
};

struct ResolvedArch {
    std::string family;
    unsigned bits = 0;
    Endianness endianness = Endianness::unknown;
    friend bool operator==(const ResolvedArch&, const ResolvedArch&) = default;
};

struct ArchVerdict {
    std::optional<ResolvedArch> resolved;
    std::vector<ArchGuess> guesses;
};

struct ArchMapping {
    std::string family;  // empty: no claim
    unsigned bits = 0;
    Endianness endianness = Endianness::unknown;
};

// Directive rule: fires when `when` holds for `name` in the config.
struct DirectiveRule {
    enum class When { set, enabled, disabled };
    std::string name;
    When when = When::set;
    ArchMapping mapping;
};

struct ArchTables {
    unsigned format = 1;
    std::vector<DirectiveRule> directives;  // file order; later rules refine earlier ones
    std::map<std::string, ArchMapping, std::less<>> compatible;
    std::vector<std::pair<std::string, ArchMapping>> compatible_prefix;
    std::map<std::string, ArchMapping, std::less<>> mime;
    std::map<std::uint32_t, ArchMapping> uimage_arch;

    /// Tables compiled in from data/arch_tables.txt.
    static const ArchTables& builtin();
};

/// Parses the plain-text table format. Throws ParseError naming the line.
ArchTables parse_arch_tables(std::string_view text);
ArchTables load_arch_tables(const std::filesystem::path& path);

std::optional<ArchGuess> detect_from_elf(ByteView blob, Diagnostics* diag = nullptr);

std::optional<ArchGuess> detect_from_config(const KernelConfig& config,
                                            const ArchTables& tables = ArchTables::builtin());

std::optional<ArchGuess> detect_from_device_tree(ByteView blob, Diagnostics* diag = nullptr,
                                                 const ArchTables& tables = ArchTables::builtin());

/// Header-level hints from kernel image formats (uImage ih_arch, zImage,
/// arm64 Image, bzImage) plus the table's per-type entries.
std::optional<ArchGuess> detect_from_mime(ByteView blob, std::string_view mime,
                                          const ArchTables& tables = ArchTables::builtin());

/// Highest evidence class wins; within it the family needs a strict
/// plurality, otherwise the verdict is unresolved. Bits come from the
/// winning class only. Endianness left unknown by the winners is filled
/// from the plurality of lower-ranked guesses of the same family.
ArchVerdict consolidate(std::vector<ArchGuess> guesses);

/// Kernel ARCH= value for a family, or nullopt when the build has no
/// mapping for it.
std::optional<std::string> kernel_arch_name(std::string_view family);

}  // namespace kcve
