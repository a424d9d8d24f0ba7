#include "kcve/dry_build.hpp"
#include "kcve/errors.hpp"
#include "kcve/process.hpp"

#include <fmt/format.h>

#include <regex>

namespace fs = std::filesystem;

namespace kcve {

namespace {

// Answers probes through the host compiler (without target -m flags) and
// otherwise just creates the requested output file.
constexpr std::string_view kStub = R"(#!/bin/sh
host="${KCVE_HOST_CC:-gcc}"
for a in "$@"; do
  case "$a" in
    -E|--version|-v|-dumpversion|-dumpfullversion|-dumpmachine|-print-*|--print-*)
      for b in "$@"; do
        shift
        case "$b" in -m*) ;; *) set -- "$@" "$b" ;; esac
      done
      exec "$host" "$@" ;;
  esac
done
out=
prev=
for a in "$@"; do
  [ "$prev" = "-o" ] && out="$a"
  prev="$a"
done
[ -n "$out" ] && [ "$out" != "-" ] && : > "$out"
exit 0
)";

std::vector<std::string> last_lines(const std::string& text, std::size_t n) {
    std::vector<std::string> lines;
    std::size_t end = text.size();
    while (end > 0 && text[end - 1] == '\n') --end;
    while (end > 0 && lines.size() < n) {
        std::size_t start = text.rfind('\n', end - 1);
        start = start == std::string::npos ? 0 : start + 1;
        lines.emplace(lines.begin(), text.substr(start, end - start));
        end = start == 0 ? 0 : start - 1;
    }
    return lines;
}

// Tool named in a shell/make "not found" message, if any.
std::optional<std::string> missing_tool(const std::string& log) {
    static const std::regex re(
        R"(([A-Za-z0-9_.+-]+): (?:[Cc]ommand not found|not found)|make(?:\[\d+\])?: ([A-Za-z0-9_.+/-]+): No such file or directory)");
    std::smatch m;
    if (!std::regex_search(log, m, re)) return std::nullopt;
    return m[1].matched ? m[1].str() : m[2].str();
}

ProcessResult make_step(const DryBuildOptions& o, const fs::path& root, std::vector<std::string> args,
                        const std::vector<std::pair<std::string, std::string>>& env) {
    args.insert(args.begin(), o.make);
    return run_process({std::move(args), root, env, o.timeout});
}

[[noreturn]] void fail(std::string_view step, const ProcessResult& r) {
    if (auto tool = missing_tool(r.output))
        throw ToolMissing(fmt::format("{}: required tool '{}' is not installed", step, *tool));
    if (r.timed_out) throw BuildFailed(fmt::format("{} timed out", step), r.exit_code, last_lines(r.output, 100));
    throw BuildFailed(fmt::format("{} failed with exit status {}", step, r.exit_code), r.exit_code,
                      last_lines(r.output, 100));
}

}  // namespace

DryBuildResult run_dry_build(const SourceTree& tree, const KernelConfig& config, const ArchVerdict& arch,
                             const DryBuildOptions& options) {
    if (!arch.resolved) throw PreconditionError("dry build needs a resolved architecture");
    auto arch_name = kernel_arch_name(arch.resolved->family);
    if (!arch_name)
        throw PreconditionError(fmt::format("no kernel ARCH value for family '{}'", arch.resolved->family));
    if (config.empty()) throw PreconditionError("dry build needs a non-empty kernel configuration");
    if (!fs::is_regular_file(tree.root / "Makefile"))
        throw PreconditionError(fmt::format("{} has no top-level Makefile", tree.root.string()));

    DryBuildResult out;
    out.arch = *arch_name;

    fs::path stub_dir = tree.root / ".kcve";
    fs::create_directories(stub_dir);
    fs::path stub = stub_dir / "kcve-cc";
    write_file(stub, kStub);
    fs::permissions(stub, fs::perms::owner_all | fs::perms::group_read | fs::perms::group_exec |
                              fs::perms::others_read | fs::perms::others_exec);
    write_file(tree.root / ".config", serialize_config(config));

    std::vector<std::pair<std::string, std::string>> env = {{"KCVE_HOST_CC", options.host_cc}};
    std::vector<std::string> vars = {"ARCH=" + out.arch, "CC=" + stub.string()};

    auto with = [&](std::vector<std::string> head) {
        head.insert(head.end(), vars.begin(), vars.end());
        return head;
    };

    ProcessResult r = make_step(options, tree.root, with({"olddefconfig"}), env);
    out.normalizer = "olddefconfig";
    if (r.exit_code != 0 && r.output.find("olddefconfig") != std::string::npos &&
        r.output.find("No rule to make target") != std::string::npos) {
        // before 3.7: no olddefconfig; accept every default interactively
        std::string cmd = fmt::format("yes '' | {} oldconfig ARCH={} CC='{}'", options.make, out.arch, stub.string());
        r = run_process({{"sh", "-c", cmd}, tree.root, env, options.timeout});
        out.normalizer = "oldconfig";
    }
    if (r.exit_code != 0) fail(fmt::format("make {}", out.normalizer), r);

    r = make_step(options, tree.root, with({"-n"}), env);
    if (r.exit_code != 0) fail("make -n", r);
    out.log = std::move(r.output);
    if (!options.log_path.empty()) write_file(options.log_path, out.log);
    return out;
}

}  // namespace kcve
