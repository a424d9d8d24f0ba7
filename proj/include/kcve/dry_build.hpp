#pragma once

#include "kcve/arch.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/source.hpp"

#include <chrono>
#include <filesystem>
#include <string>

namespace kcve {

struct DryBuildOptions {
    std::filesystem::path log_path;  // when set, the dry-run log is also written here
    std::string make = "make";
    std::string host_cc = "gcc";     // preprocessing and version probes are delegated to it
    std::chrono::seconds timeout{3600};
};

struct DryBuildResult {
    std::string log;
    std::string arch;        // ARCH= value used
    std::string normalizer;  // "olddefconfig" or "oldconfig"
};

/// Installs `config` as the tree's .config, reconciles it with
/// olddefconfig (falling back to `yes "" | make oldconfig`), then runs
/// `make -n` with ARCH set and CC pointing at a stub inside the tree.
/// Throws PreconditionError before spawning anything when the architecture
/// is unresolved or unmapped, the config is empty or the tree has no
/// Makefile; ToolMissing for absent host tools; BuildFailed with the last
/// 100 log lines on a failing make.
DryBuildResult run_dry_build(const SourceTree& tree, const KernelConfig& config, const ArchVerdict& arch,
                             const DryBuildOptions& options = {});

}  // namespace kcve
