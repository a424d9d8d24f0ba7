#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace kcve {

/// Lexically normalizes a source-tree path: backslashes become slashes,
/// "." segments and duplicate separators drop out, ".." folds into its
/// parent. Returns nullopt for absolute paths, empty paths and paths that
/// climb above the root.
std::optional<std::string> normalize_tree_path(std::string_view path);

/// Set of source-tree-relative files seen in a dry-build log, with a
/// basename index and an index of directories holding those files.
class WitnessSet {
public:
    /// Normalizes and inserts; false when the path is rejected.
    bool insert(std::string_view path);

    bool contains(std::string_view normalized) const { return files_.count(std::string(normalized)) != 0; }
    bool has_basename(std::string_view name) const { return basenames_.count(std::string(name)) != 0; }
    /// Full paths sharing `name` as basename, sorted.
    std::set<std::string> paths_for_basename(std::string_view name) const;
    /// True when at least one witnessed file lives directly in `dir`.
    bool directory_has_source(std::string_view dir) const { return directories_.count(std::string(dir)) != 0; }

    const std::set<std::string>& files() const noexcept { return files_; }
    const std::map<std::string, std::set<std::string>>& basenames() const noexcept { return basenames_; }
    std::size_t size() const noexcept { return files_.size(); }
    bool empty() const noexcept { return files_.empty(); }

    /// Index derived from `files` alone; equals basenames() by construction.
    static std::map<std::string, std::set<std::string>> index_basenames(const std::set<std::string>& files);

    /// Sorted, newline-terminated path list.
    std::string serialize() const;
    static WitnessSet deserialize(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static WitnessSet load(const std::filesystem::path& path);

    friend bool operator==(const WitnessSet& a, const WitnessSet& b) { return a.files_ == b.files_; }

private:
    std::set<std::string> files_;
    std::map<std::string, std::set<std::string>> basenames_;
    std::set<std::string> directories_;
};

struct BuildLogStats {
    std::size_t lines = 0;            // non-blank lines
    std::size_t recipe_lines = 0;     // compiler invocations
    std::size_t shorthand_lines = 0;  // "CC foo.o" style lines
    std::size_t skipped_lines = 0;    // neither of the above
    std::size_t rejected_paths = 0;   // source tokens that failed normalization
};

/// Collects .c/.S/.s tokens from compiler recipe lines (the argument of -o
/// excluded) and the inferred sources of quiet "CC x.o" / "AS x.o" lines.
/// Absolute paths under `tree_root` are made relative to it.
WitnessSet parse_build_log(std::string_view log, BuildLogStats* stats = nullptr,
                           std::string_view tree_root = {});

}  // namespace kcve
