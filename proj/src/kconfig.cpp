#include "kcve/kconfig.hpp"

#include <fmt/format.h>

#include <cctype>

namespace kcve {

namespace {

constexpr std::string_view kNotSetSuffix = " is not set";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
}

bool is_symbol(std::string_view name) {
    if (!name.starts_with("CONFIG_") || name.size() == 7) return false;
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

bool all_of(std::string_view s, int (*pred)(int)) {
    if (s.empty()) return false;
    for (char c : s)
        if (!pred(static_cast<unsigned char>(c))) return false;
    return true;
}

std::optional<std::string> unquote(std::string_view v) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"') return std::nullopt;
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] == '\\' && i + 2 < v.size()) {
            out.push_back(v[++i]);
        } else if (v[i] == '"') {
            return std::nullopt;
        } else {
            out.push_back(v[i]);
        }
    }
    return out;
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

ConfigValue parse_value(std::string_view v, std::string_view name, Diagnostics* diag) {
    if (v == "y") return ConfigValue::yes();
    if (v == "m") return ConfigValue::module();
    if (v == "n") return ConfigValue::no();
    if (auto s = unquote(v)) return ConfigValue::string(std::move(*s));
    if ((v.starts_with("0x") || v.starts_with("0X")) && all_of(v.substr(2), &isxdigit))
        return ConfigValue::hex(std::string(v));
    if (all_of(v.starts_with('-') ? v.substr(1) : v, &isdigit)) return ConfigValue::integer(std::string(v));
    warn(diag, fmt::format("{}: unquoted non-numeric value '{}' kept as string", name, v));
    return ConfigValue::string(std::string(v));
}

// Returns the (name, value) of a directive line, or nullopt for
// comments/blank lines. Sets `bad` for lines that are neither.
struct Directive {
    std::string name;
    ConfigValue value;
};

std::optional<Directive> parse_line(std::string_view line, bool& bad, Diagnostics* diag) {
    bad = false;
    line = trim(line);
    if (line.empty()) return std::nullopt;
    if (line.front() == '#') {
        std::string_view body = trim(line.substr(1));
        if (body.ends_with(kNotSetSuffix)) {
            std::string_view name = body.substr(0, body.size() - kNotSetSuffix.size());
            if (is_symbol(name)) return Directive{std::string(name), ConfigValue::no()};
        }
        return std::nullopt;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos || !is_symbol(line.substr(0, eq))) {
        bad = true;
        return std::nullopt;
    }
    std::string_view name = line.substr(0, eq);
    return Directive{std::string(name), parse_value(line.substr(eq + 1), name, diag)};
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t lineno = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        fn(text.substr(0, nl), ++lineno);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
}

bool has_config_header(std::string_view text) {
    if (text.find("Automatically generated file") != std::string_view::npos) return true;
    bool found = false;
    for_each_line(text, [&](std::string_view line, std::size_t) {
        if (found) return;
        line = trim(line);
        found = line.starts_with("# Linux/") || line.starts_with("# Linux kernel version:");
    });
    return found;
}

}  // namespace

std::string_view to_string(ConfigSource s) {
    switch (s) {
        case ConfigSource::plaintext: return "plaintext";
        case ConfigSource::inline_string: return "inline-string";
        case ConfigSource::embedded_container: return "embedded-container";
    }
    return "unknown";
}

const ConfigValue* KernelConfig::find(std::string_view name) const {
    auto it = options.find(std::string(name));
    return it == options.end() ? nullptr : &it->second;
}

bool KernelConfig::enabled(std::string_view name) const {
    const ConfigValue* v = find(name);
    return v && v->enabled();
}

KernelConfig parse_config(std::string_view text, Diagnostics* diag) {
    KernelConfig cfg;
    for_each_line(text, [&](std::string_view line, std::size_t lineno) {
        bool bad = false;
        auto d = parse_line(line, bad, diag);
        if (bad) {
            warn(diag, fmt::format("line {}: not a configuration directive, skipped", lineno));
            return;
        }
        if (!d) return;
        auto [it, inserted] = cfg.options.insert_or_assign(std::move(d->name), std::move(d->value));
        if (!inserted) warn(diag, fmt::format("line {}: {} redefined, later value kept", lineno, it->first));
    });
    return cfg;
}

std::string serialize_config(const KernelConfig& config) {
    std::string out;
    for (const auto& [name, value] : config.options) {
        switch (value.kind) {
            case ValueKind::no: out += fmt::format("# {} is not set\n", name); break;
            case ValueKind::string: out += fmt::format("{}={}\n", name, quote(value.text)); break;
            default: out += fmt::format("{}={}\n", name, value.text); break;
        }
    }
    return out;
}

std::optional<KernelConfig> extract_plaintext_config(std::string_view text,
                                                     const PlaintextOptions& options) {
    if (text.empty()) return std::nullopt;
    std::size_t directives = 0;
    for_each_line(text, [&](std::string_view line, std::size_t) {
        bool bad = false;
        if (parse_line(line, bad, nullptr)) ++directives;
    });
    if (directives < options.min_directives && !has_config_header(text)) return std::nullopt;
    KernelConfig cfg = parse_config(text);
    cfg.source_kind = ConfigSource::plaintext;
    return cfg;
}

}  // namespace kcve
