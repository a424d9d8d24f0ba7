#include "kcve/arch.hpp"

#include <fmt/format.h>

#include <array>

namespace kcve {

namespace {

struct Machine {
    std::uint16_t code;
    std::string_view family;
};

// e_machine values from the ELF gABI registry.
constexpr std::array kMachines = {
    Machine{2, "SPARC"},
    Machine{3, family::kX86},
    Machine{4, "m68k"},
    Machine{8, family::kMips},
    Machine{10, family::kMips},  // MIPS RS3000 little-endian
    Machine{20, family::kPowerPc},
    Machine{21, family::kPowerPc},
    Machine{22, "S390"},
    Machine{40, family::kArm},
    Machine{42, "SuperH"},
    Machine{43, "SPARC"},
    Machine{50, "IA-64"},
    Machine{62, family::kX86_64},
    Machine{94, "Xtensa"},
    Machine{183, family::kAarch64},
    Machine{243, "RISC-V"},
    Machine{258, "LoongArch"},
};

constexpr std::array<std::string_view, 11> kMipsArch = {
    "mips1", "mips2", "mips3", "mips4", "mips5", "mips32", "mips64",
    "mips32r2", "mips64r2", "mips32r6", "mips64r6",
};

std::string mips_variant(std::uint32_t flags) {
    std::uint32_t arch = flags >> 28;
    std::string out = arch < kMipsArch.size() ? std::string(kMipsArch[arch]) : fmt::format("arch{}", arch);
    if (flags & 0x20) return out + " n32";
    switch (flags & 0xf000) {
        case 0x1000: return out + " o32";
        case 0x2000: return out + " o64";
        case 0x3000: return out + " eabi32";
        case 0x4000: return out + " eabi64";
        default: break;
    }
    return out;
}

}  // namespace

std::optional<ArchGuess> detect_from_elf(ByteView blob, Diagnostics* diag) {
    if (blob.size() < 4 || blob[0] != 0x7f || blob[1] != 'E' || blob[2] != 'L' || blob[3] != 'F')
        return std::nullopt;
    if (blob.size() < 6) {
        warn(diag, "ELF header truncated before EI_DATA");
        return std::nullopt;
    }
    std::uint8_t cls = blob[4], data = blob[5];
    if ((cls != 1 && cls != 2) || (data != 1 && data != 2)) {
        warn(diag, fmt::format("ELF header has invalid class {} or data encoding {}", cls, data));
        return std::nullopt;
    }
    std::size_t header_size = cls == 1 ? 52 : 64;
    if (blob.size() < header_size) {
        warn(diag, fmt::format("ELF header truncated: {} of {} bytes", blob.size(), header_size));
        return std::nullopt;
    }
    bool be = data == 2;
    std::uint16_t machine = load_u16(blob, 18, be);
    std::uint32_t flags = load_u32(blob, cls == 1 ? 36 : 48, be);

    ArchGuess g;
    g.evidence = Evidence::elf_header;
    g.bits = cls == 1 ? 32 : 64;
    g.endianness = be ? Endianness::big : Endianness::little;
    g.family = fmt::format("EM_{}", machine);
    for (const auto& m : kMachines) {
        if (m.code != machine) continue;
        g.family = m.family;
        break;
    }
    if (g.family == family::kMips) g.variant = mips_variant(flags);
    return g;
}

}  // namespace kcve
