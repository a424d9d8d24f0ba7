#include "kcve/nvd.hpp"
#include "kcve/witness.hpp"

#include <algorithm>
#include <cctype>

namespace kcve {

namespace {

bool token_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '/' || c == '-';
}

// [A-Za-z0-9_./-]*[A-Za-z0-9_]\.(c|h|S)
bool is_ref(std::string_view t) {
    if (t.size() < 3 || t[t.size() - 2] != '.') return false;
    char ext = t.back();
    if (ext != 'c' && ext != 'h' && ext != 'S') return false;
    char stem_end = t[t.size() - 3];
    return std::isalnum(static_cast<unsigned char>(stem_end)) || stem_end == '_';
}

bool strip_versioned_tree(std::string_view& p) {
    if (!p.starts_with("linux-") || p.size() < 7 || !std::isdigit(static_cast<unsigned char>(p[6]))) return false;
    auto slash = p.find('/');
    if (slash == std::string_view::npos) return false;
    p.remove_prefix(slash + 1);
    return true;
}

std::string normalize_ref(std::string_view p) {
    for (bool changed = true; changed;) {
        changed = false;
        if (p.starts_with("./")) {
            p.remove_prefix(2);
            changed = true;
        } else if (p.starts_with("/")) {
            p.remove_prefix(1);
            changed = true;
        } else if (p.starts_with("linux/")) {
            p.remove_prefix(6);
            changed = true;
        } else {
            changed = strip_versioned_tree(p);
        }
    }
    if (auto n = normalize_tree_path(p)) return *n;
    return std::string(p);
}

}  // namespace

std::string_view to_string(RefKind k) { return k == RefKind::full_path ? "full-path" : "file-only"; }

std::string_view to_string(RefClass c) {
    switch (c) {
        case RefClass::full_path: return "full-path";
        case RefClass::file_only: return "file-only";
        case RefClass::no_reference: return "no-reference";
    }
    return "no-reference";
}

std::string_view FileRef::basename() const {
    std::string_view n = normalized;
    auto slash = n.rfind('/');
    return slash == std::string_view::npos ? n : n.substr(slash + 1);
}

std::string_view FileRef::directory() const {
    std::string_view n = normalized;
    auto slash = n.rfind('/');
    return slash == std::string_view::npos ? std::string_view{} : n.substr(0, slash);
}

std::vector<FileRef> extract_file_refs(std::string_view text) {
    std::vector<FileRef> refs;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!token_char(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && token_char(text[j])) ++j;
        std::string_view tok = text.substr(i, j - i);
        i = j;
        while (!tok.empty() && (tok.back() == '.' || tok.back() == '-')) tok.remove_suffix(1);
        if (!is_ref(tok)) continue;

        FileRef r;
        r.raw = std::string(tok);
        r.kind = tok.find('/') != std::string_view::npos ? RefKind::full_path : RefKind::file_only;
        r.normalized = r.kind == RefKind::full_path ? normalize_ref(tok) : std::string(tok);
        bool seen = std::any_of(refs.begin(), refs.end(), [&](const FileRef& o) {
            return o.kind == r.kind && o.normalized == r.normalized;
        });
        if (!seen) refs.push_back(std::move(r));
    }
    return refs;
}

RefClass reference_class(const CveRecord& r) {
    if (r.file_refs.empty()) return RefClass::no_reference;
    bool full = std::any_of(r.file_refs.begin(), r.file_refs.end(),
                            [](const FileRef& f) { return f.kind == RefKind::full_path; });
    return full ? RefClass::full_path : RefClass::file_only;
}

}  // namespace kcve
