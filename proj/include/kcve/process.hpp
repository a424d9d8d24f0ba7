#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kcve {

struct ProcessSpec {
    std::vector<std::string> argv;  // argv[0] is looked up on PATH unless it contains '/'
    std::filesystem::path cwd;      // empty: inherit
    std::vector<std::pair<std::string, std::string>> env;  // added to / overriding the parent environment
    std::optional<std::chrono::seconds> timeout;
};

struct ProcessResult {
    int exit_code = 0;   // 128 + signal for signalled children
    bool timed_out = false;
    std::string output;  // stdout and stderr interleaved
};

/// Absolute path of `name` on PATH, or nullopt.
std::optional<std::filesystem::path> find_program(const std::string& name);

/// Runs a child with stdin from /dev/null and combined output captured.
/// Throws ToolMissing when argv[0] cannot be found or executed.
ProcessResult run_process(const ProcessSpec& spec);

}  // namespace kcve
