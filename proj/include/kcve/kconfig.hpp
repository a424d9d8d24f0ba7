#pragma once

#include "kcve/bytes.hpp"
#include "kcve/codec.hpp"
#include "kcve/diagnostics.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace kcve {

enum class ValueKind { yes, module, no, string, integer, hex };

/// Value of one configuration option. For strings `text` holds the
/// unescaped content; for integers and hex literals the literal as written;
/// for tristates "y", "m" or "n".
struct ConfigValue {
    ValueKind kind = ValueKind::no;
    std::string text = "n";

    static ConfigValue yes() { return {ValueKind::yes, "y"}; }
    static ConfigValue module() { return {ValueKind::module, "m"}; }
    static ConfigValue no() { return {ValueKind::no, "n"}; }
    static ConfigValue string(std::string s) { return {ValueKind::string, std::move(s)}; }
    static ConfigValue integer(std::string literal) { return {ValueKind::integer, std::move(literal)}; }
    static ConfigValue hex(std::string literal) { return {ValueKind::hex, std::move(literal)}; }

    /// Y or M.
    bool enabled() const { return kind == ValueKind::yes || kind == ValueKind::module; }

    friend bool operator==(const ConfigValue&, const ConfigValue&) = default;
};

enum class ConfigSource { plaintext, inline_string, embedded_container };

std::string_view to_string(ConfigSource s);

struct KernelConfig {
    std::map<std::string, ConfigValue> options;  // keys are CONFIG_-prefixed
    ConfigSource source_kind = ConfigSource::plaintext;
    std::string origin_path;

    const ConfigValue* find(std::string_view name) const;
    bool enabled(std::string_view name) const;
    bool empty() const { return options.empty(); }
    std::size_t size() const { return options.size(); }
};

/// Parses kernel `.config` text. Comment lines other than "# CONFIG_X is not
/// set" and blank lines are ignored; unrecognised lines are skipped with a
/// warning; a repeated key keeps the later value and warns.
KernelConfig parse_config(std::string_view text, Diagnostics* diag = nullptr);

/// Renders `.config` text: "CONFIG_X=y" assignments and "# CONFIG_X is not
/// set" lines, one per option, in key order.
std::string serialize_config(const KernelConfig& config);

struct PlaintextOptions {
    std::size_t min_directives = 50;
};

/// Accepts `text` as a configuration when it carries the generated-file
/// header or at least `min_directives` assignment / not-set lines.
std::optional<KernelConfig> extract_plaintext_config(std::string_view text,
                                                     const PlaintextOptions& options = {});

enum class CandidateKind { plain_text, kernel_binary, other };

std::string_view to_string(CandidateKind k);

/// Routes a file to the plain-text path, the kernel-binary path, or out of
/// configuration analysis. `path_hint` is only used for module naming.
CandidateKind classify_candidate(ByteView blob, std::string_view mime,
                                 std::string_view path_hint = {});

inline constexpr std::string_view kIkconfigStart = "IKCFG_ST";
inline constexpr std::string_view kIkconfigEnd = "IKCFG_ED";

struct IkconfigOptions {
    std::size_t max_candidates = 64;   // carved containers per layer
    unsigned max_depth = 1;            // container layers below the raw blob
    std::size_t max_decompressed = kDefaultMaxDecompressed;
};

struct IkconfigMatch {
    KernelConfig config;
    std::size_t marker_offset = 0;                  // within the layer it was found in
    std::optional<Compression> payload_format;      // nullopt: raw text payload
    std::optional<std::size_t> container_offset;    // top-level offset of the carved container
    std::optional<Compression> container_format;
};

/// Locates an embedded IKCONFIG copy in a kernel image or module. Searches
/// the raw blob for the start marker first, then carved compressed
/// containers. Throws ExtractionError when a start marker in the raw blob has
/// no matching end marker.
std::optional<IkconfigMatch> find_ikconfig(ByteView blob, const IkconfigOptions& options = {},
                                           Diagnostics* diag = nullptr);

}  // namespace kcve
