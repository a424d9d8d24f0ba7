#include "kcve/witness.hpp"
#include "kcve/bytes.hpp"

#include <algorithm>
#include <vector>

namespace kcve {

namespace {

std::string_view basename_of(std::string_view p) {
    auto slash = p.rfind('/');
    return slash == std::string_view::npos ? p : p.substr(slash + 1);
}

std::string_view dirname_of(std::string_view p) {
    auto slash = p.rfind('/');
    return slash == std::string_view::npos ? std::string_view{} : p.substr(0, slash);
}

bool is_source_token(std::string_view t) {
    return t.size() > 2 && (t.ends_with(".c") || t.ends_with(".S") || t.ends_with(".s"));
}

bool is_compiler(std::string_view t) {
    std::string_view b = basename_of(t);
    if (b == "gcc" || b == "cc" || b == "clang" || b == "c89" || b == "c99" || b == "kcve-cc") return true;
    if (b.starts_with("gcc-") || b.starts_with("clang-")) return true;
    return b.ends_with("-gcc") || b.ends_with("-cc") || b.ends_with("-clang");
}

std::vector<std::string_view> tokenize(std::string_view line) {
    constexpr std::string_view kSep = " \t\r;&|";
    constexpr std::string_view kStrip = "'\"()`";
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        i = line.find_first_not_of(kSep, i);
        if (i == std::string_view::npos) break;
        std::size_t j = line.find_first_of(kSep, i);
        if (j == std::string_view::npos) j = line.size();
        std::string_view t = line.substr(i, j - i);
        while (!t.empty() && kStrip.find(t.front()) != std::string_view::npos) t.remove_prefix(1);
        while (!t.empty() && kStrip.find(t.back()) != std::string_view::npos) t.remove_suffix(1);
        if (!t.empty()) out.push_back(t);
        i = j;
    }
    return out;
}

}  // namespace

std::optional<std::string> normalize_tree_path(std::string_view path) {
    std::string p(path);
    std::replace(p.begin(), p.end(), '\\', '/');
    if (p.empty() || p.front() == '/') return std::nullopt;
    std::vector<std::string_view> parts;
    std::string_view rest = p;
    while (!rest.empty()) {
        auto slash = rest.find('/');
        std::string_view seg = rest.substr(0, slash);
        rest = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash + 1);
        if (seg.empty() || seg == ".") continue;
        if (seg == "..") {
            if (parts.empty()) return std::nullopt;
            parts.pop_back();
            continue;
        }
        parts.push_back(seg);
    }
    if (parts.empty()) return std::nullopt;
    std::string out;
    for (auto seg : parts) {
        if (!out.empty()) out.push_back('/');
        out.append(seg);
    }
    return out;
}

bool WitnessSet::insert(std::string_view path) {
    auto n = normalize_tree_path(path);
    if (!n) return false;
    auto [it, fresh] = files_.insert(std::move(*n));
    if (fresh) {
        basenames_[std::string(basename_of(*it))].insert(*it);
        directories_.insert(std::string(dirname_of(*it)));
    }
    return true;
}

std::set<std::string> WitnessSet::paths_for_basename(std::string_view name) const {
    auto it = basenames_.find(std::string(name));
    return it == basenames_.end() ? std::set<std::string>{} : it->second;
}

std::map<std::string, std::set<std::string>> WitnessSet::index_basenames(const std::set<std::string>& files) {
    std::map<std::string, std::set<std::string>> idx;
    for (const auto& f : files) idx[std::string(basename_of(f))].insert(f);
    return idx;
}

std::string WitnessSet::serialize() const {
    std::string out;
    for (const auto& f : files_) {
        out += f;
        out += '\n';
    }
    return out;
}

WitnessSet WitnessSet::deserialize(std::string_view text) {
    WitnessSet w;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        if (!line.empty()) w.insert(line);
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return w;
}

void WitnessSet::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

WitnessSet WitnessSet::load(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

WitnessSet parse_build_log(std::string_view log, BuildLogStats* stats, std::string_view tree_root) {
    BuildLogStats st;
    WitnessSet w;
    std::string root(tree_root);
    while (!root.empty() && root.back() == '/') root.pop_back();

    auto add = [&](std::string_view token) {
        std::string_view t = token;
        if (!root.empty() && t.starts_with(root) && t.size() > root.size() && t[root.size()] == '/')
            t.remove_prefix(root.size() + 1);
        if (!w.insert(t)) ++st.rejected_paths;
    };

    while (!log.empty()) {
        auto nl = log.find('\n');
        std::string_view line = log.substr(0, nl);
        log = nl == std::string_view::npos ? std::string_view{} : log.substr(nl + 1);

        auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        ++st.lines;

        bool recipe = std::any_of(tokens.begin(), tokens.end(),
                                  [](std::string_view t) { return t == "-c" || is_compiler(t); });
        if (recipe) {
            ++st.recipe_lines;
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                if (tokens[i] == "-o") {
                    ++i;
                    continue;
                }
                if (tokens[i].front() != '-' && is_source_token(tokens[i])) add(tokens[i]);
            }
            continue;
        }

        // quiet implicit-rule shorthand: "CC foo.o", "CC [M] foo.o", "AS foo.o"
        std::size_t k = 1;
        if (tokens.size() > 2 && tokens[1] == "[M]") k = 2;
        if ((tokens[0] == "CC" || tokens[0] == "AS") && tokens.size() == k + 1 && tokens[k].ends_with(".o") &&
            tokens[k].size() > 2) {
            ++st.shorthand_lines;
            std::string src(tokens[k].substr(0, tokens[k].size() - 2));
            src += tokens[0] == "CC" ? ".c" : ".S";
            add(src);
            continue;
        }
        ++st.skipped_lines;
    }
    if (stats) *stats = st;
    return w;
}

}  // namespace kcve
