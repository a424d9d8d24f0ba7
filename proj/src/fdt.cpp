#include "kcve/arch.hpp"

#include <fmt/format.h>

namespace kcve {

namespace {

constexpr std::uint32_t kFdtMagic = 0xd00dfeed;
constexpr std::uint32_t kBeginNode = 1, kEndNode = 2, kProp = 3, kNop = 4, kEnd = 9;

std::size_t align4(std::size_t v) { return (v + 3) & ~std::size_t{3}; }

struct Malformed {
    std::string what;
};

// Walks the structure block and returns the compatible lists of the
// children of /cpus, in document order.
std::vector<std::vector<std::string>> cpu_compatibles(ByteView blob) {
    if (blob.size() < 40) throw Malformed{"header truncated"};
    std::uint32_t total = load_u32(blob, 4, true);
    std::uint32_t off_struct = load_u32(blob, 8, true);
    std::uint32_t off_strings = load_u32(blob, 12, true);
    if (total > blob.size()) throw Malformed{fmt::format("totalsize {} exceeds blob size {}", total, blob.size())};
    if (off_struct >= total || off_strings >= total) throw Malformed{"block offsets outside blob"};
    ByteView fdt = blob.first(total);
    std::string_view strings = as_chars(fdt.subspan(off_strings));

    std::vector<std::string> path;
    std::vector<std::vector<std::string>> out;
    std::size_t pos = off_struct;
    auto need = [&](std::size_t n) {
        if (pos + n > fdt.size()) throw Malformed{fmt::format("structure block truncated at offset {}", pos)};
    };
    for (;;) {
        need(4);
        std::uint32_t token = load_u32(fdt, pos, true);
        pos += 4;
        switch (token) {
            case kBeginNode: {
                std::string_view rest = as_chars(fdt.subspan(pos));
                auto nul = rest.find('\0');
                if (nul == std::string_view::npos) throw Malformed{"unterminated node name"};
                path.emplace_back(rest.substr(0, nul));
                pos = align4(pos + nul + 1);
                break;
            }
            case kEndNode:
                if (path.empty()) throw Malformed{"unbalanced end of node"};
                path.pop_back();
                break;
            case kProp: {
                need(8);
                std::uint32_t len = load_u32(fdt, pos, true);
                std::uint32_t nameoff = load_u32(fdt, pos + 4, true);
                pos += 8;
                need(len);
                if (nameoff >= strings.size()) throw Malformed{"property name offset outside strings block"};
                std::string_view name = strings.substr(nameoff);
                name = name.substr(0, name.find('\0'));
                // path: "", "cpus", "cpu@N"
                if (path.size() == 3 && path[1] == "cpus" && name == "compatible") {
                    std::vector<std::string> list;
                    std::string_view value = as_chars(fdt.subspan(pos, len));
                    while (!value.empty()) {
                        auto nul = value.find('\0');
                        std::string_view item = value.substr(0, nul);
                        if (!item.empty()) list.emplace_back(item);
                        if (nul == std::string_view::npos) break;
                        value.remove_prefix(nul + 1);
                    }
                    out.push_back(std::move(list));
                }
                pos = align4(pos + len);
                break;
            }
            case kNop: break;
            case kEnd: return out;
            default: throw Malformed{fmt::format("unknown structure token {:#x} at offset {}", token, pos - 4)};
        }
    }
}

std::optional<ArchMapping> lookup(const ArchTables& tables, std::string_view compatible) {
    if (auto it = tables.compatible.find(compatible); it != tables.compatible.end()) return it->second;
    const ArchMapping* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [prefix, mapping] : tables.compatible_prefix) {
        if (compatible.starts_with(prefix) && prefix.size() > best_len) {
            best = &mapping;
            best_len = prefix.size();
        }
    }
    if (best) return *best;
    return std::nullopt;
}

}  // namespace

std::optional<ArchGuess> detect_from_device_tree(ByteView blob, Diagnostics* diag, const ArchTables& tables) {
    if (blob.size() < 4 || load_u32(blob, 0, true) != kFdtMagic) return std::nullopt;
    std::vector<std::vector<std::string>> cpus;
    try {
        cpus = cpu_compatibles(blob);
    } catch (const Malformed& m) {
        warn(diag, fmt::format("malformed device tree: {}", m.what));
        return std::nullopt;
    }
    // A compatible list runs from most to least specific; first mapped
    // entry of the first cpu node decides.
    for (const auto& list : cpus) {
        for (const auto& c : list) {
            auto m = lookup(tables, c);
            if (!m || m->family.empty()) continue;
            ArchGuess g;
            g.family = m->family;
            g.bits = m->bits;
            g.endianness = m->endianness;
            g.evidence = Evidence::device_tree;
            g.variant = c;
            return g;
        }
    }
    return std::nullopt;
}

}  // namespace kcve
