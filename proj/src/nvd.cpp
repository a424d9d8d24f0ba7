#include "kcve/nvd.hpp"
#include "kcve/bytes.hpp"
#include "kcve/codec.hpp"
#include "kcve/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <tuple>

namespace fs = std::filesystem;
using nlohmann::json;

namespace kcve {

namespace {

constexpr std::size_t kMaxFeedSize = std::size_t{4} << 30;

const json& member(const json& obj, const char* key, const std::string& path, json::value_t type) {
    if (!obj.is_object()) throw SchemaError(path, "expected an object");
    auto it = obj.find(key);
    std::string p = path + "." + key;
    if (it == obj.end()) throw SchemaError(p, "missing required member");
    bool ok = it->type() == type || (type == json::value_t::number_unsigned && it->is_number_integer());
    if (!ok) throw SchemaError(p, fmt::format("expected {}, found {}", json(type).type_name(), it->type_name()));
    return *it;
}

const json* optional_member(const json& obj, const char* key, const std::string& path, json::value_t type) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    if (it->type() != type)
        throw SchemaError(path + "." + key, fmt::format("expected {}, found {}", json(type).type_name(), it->type_name()));
    return &*it;
}

std::string optional_string(const json& obj, const char* key, const std::string& path) {
    const json* v = optional_member(obj, key, path, json::value_t::string);
    return v ? v->get<std::string>() : std::string{};
}

// cpe:2.3:part:vendor:product:version:... with backslash escapes
std::vector<std::string> split_cpe(std::string_view cpe) {
    std::vector<std::string> parts(1);
    for (std::size_t i = 0; i < cpe.size(); ++i) {
        char c = cpe[i];
        if (c == '\\' && i + 1 < cpe.size()) {
            parts.back().push_back(cpe[++i]);
        } else if (c == ':') {
            parts.emplace_back();
        } else {
            parts.back().push_back(c);
        }
    }
    return parts;
}

struct CpeEntry {
    std::string criteria;
    bool vulnerable = false;
    std::map<std::string, std::string> bounds;  // versionStartIncluding etc.
    std::string path;
};

bool is_kernel_cpe(const std::vector<std::string>& p) {
    return p.size() > 5 && p[0] == "cpe" && p[2] == "o" && p[3] == "linux" && p[4] == "linux_kernel";
}

std::optional<VersionConstraint> constraint_of(const CpeEntry& e, const std::vector<std::string>& parts,
                                               Diagnostics* diag, IngestStats& st) {
    VersionConstraint c;
    if (!e.bounds.empty()) {
        static constexpr std::array<std::tuple<const char*, bool, bool>, 4> kKeys = {{
            {"versionStartIncluding", true, true},
            {"versionStartExcluding", true, false},
            {"versionEndIncluding", false, true},
            {"versionEndExcluding", false, false},
        }};
        for (const auto& [key, is_start, inclusive] : kKeys) {
            auto it = e.bounds.find(key);
            if (it == e.bounds.end()) continue;
            auto v = parse_release(it->second);
            if (!v) {
                warn(diag, fmt::format("{}.{}: unparseable version '{}', constraint skipped", e.path, key, it->second));
                ++st.skipped_cpes;
                return std::nullopt;
            }
            (is_start ? c.start : c.end) = VersionBound{*v, inclusive};
        }
        if (!c.valid()) {
            ++st.skipped_cpes;
            return std::nullopt;
        }
        return c;
    }
    const std::string& version = parts[5];
    if (version == "*") {
        c.start = VersionBound{KernelVersion{}, true};
        return c;
    }
    if (version == "-" || version.empty()) {
        ++st.skipped_cpes;
        return std::nullopt;
    }
    auto v = parse_release(version);
    if (!v) {
        warn(diag, fmt::format("{}: unparseable CPE version '{}', constraint skipped", e.path, version));
        ++st.skipped_cpes;
        return std::nullopt;
    }
    c.exact = *v;
    return c;
}

CpeEntry read_cpe(const json& m, const std::string& path, const char* criteria_key) {
    CpeEntry e;
    e.path = path;
    e.criteria = member(m, criteria_key, path, json::value_t::string).get<std::string>();
    if (const json* v = optional_member(m, "vulnerable", path, json::value_t::boolean)) e.vulnerable = v->get<bool>();
    for (auto it = m.begin(); it != m.end(); ++it) {
        if (!it.key().starts_with("version")) continue;
        if (!it->is_string()) throw SchemaError(path + "." + it.key(), "expected string");
        e.bounds[it.key()] = it->get<std::string>();
    }
    return e;
}

// 1.1 nodes may nest via "children"; 2.0 nodes are flat.
void collect_nodes(const json& nodes, const std::string& path, const char* match_key, const char* criteria_key,
                   std::vector<CpeEntry>& out) {
    if (!nodes.is_array()) throw SchemaError(path, "expected array");
    for (std::size_t n = 0; n < nodes.size(); ++n) {
        std::string np = fmt::format("{}[{}]", path, n);
        const json& node = nodes[n];
        if (!node.is_object()) throw SchemaError(np, "expected object");
        if (const json* ms = optional_member(node, match_key, np, json::value_t::array)) {
            for (std::size_t k = 0; k < ms->size(); ++k) {
                std::string mp = fmt::format("{}.{}[{}]", np, match_key, k);
                out.push_back(read_cpe((*ms)[k], mp, criteria_key));
            }
        }
        if (const json* ch = optional_member(node, "children", np, json::value_t::array))
            collect_nodes(*ch, np + ".children", match_key, criteria_key, out);
    }
}

void finish_record(CveRecord rec, const std::vector<CpeEntry>& cpes, std::vector<CveRecord>& out, Diagnostics* diag,
                   IngestStats& st) {
    bool kernel = false;
    for (const auto& e : cpes) {
        auto parts = split_cpe(e.criteria);
        if (!is_kernel_cpe(parts) || !e.vulnerable) continue;
        kernel = true;
        if (auto c = constraint_of(e, parts, diag, st)) rec.constraints.push_back(std::move(*c));
    }
    if (!kernel) return;
    if (rec.constraints.empty()) {
        ++st.dropped_unconstrained;
        return;
    }
    ++st.kernel_records;
    rec.file_refs = extract_file_refs(rec.description);
    out.push_back(std::move(rec));
}

void check_id(const std::string& id, const std::string& path) {
    if (!is_valid_cve_id(id)) throw SchemaError(path, fmt::format("'{}' is not a CVE identifier", id));
}

std::string english(const json& list, const std::string& path, const char* lang_key, const char* value_key) {
    if (!list.is_array()) throw SchemaError(path, "expected array");
    for (std::size_t i = 0; i < list.size(); ++i) {
        std::string p = fmt::format("{}[{}]", path, i);
        const json& d = list[i];
        if (member(d, lang_key, p, json::value_t::string).get<std::string>() == "en")
            return member(d, value_key, p, json::value_t::string).get<std::string>();
    }
    return {};
}

void ingest_v2(const json& doc, NvdSnapshot& snap, Diagnostics* diag, IngestStats& st) {
    const json& vulns = member(doc, "vulnerabilities", "$", json::value_t::array);
    snap.schema = "nvd-json-2.0";
    snap.snapshot_date = optional_string(doc, "timestamp", "$");
    for (std::size_t i = 0; i < vulns.size(); ++i) {
        ++st.items;
        std::string p = fmt::format("$.vulnerabilities[{}]", i);
        const json& cve = member(vulns[i], "cve", p, json::value_t::object);
        p += ".cve";
        CveRecord rec;
        rec.id = member(cve, "id", p, json::value_t::string).get<std::string>();
        check_id(rec.id, p + ".id");
        rec.description = english(member(cve, "descriptions", p, json::value_t::array), p + ".descriptions", "lang", "value");
        rec.published = optional_string(cve, "published", p);
        rec.modified = optional_string(cve, "lastModified", p);
        std::vector<CpeEntry> cpes;
        if (const json* cfgs = optional_member(cve, "configurations", p, json::value_t::array)) {
            for (std::size_t c = 0; c < cfgs->size(); ++c) {
                std::string cp = fmt::format("{}.configurations[{}]", p, c);
                collect_nodes(member((*cfgs)[c], "nodes", cp, json::value_t::array), cp + ".nodes", "cpeMatch",
                              "criteria", cpes);
            }
        }
        finish_record(std::move(rec), cpes, snap.records, diag, st);
    }
}

void ingest_v11(const json& doc, NvdSnapshot& snap, Diagnostics* diag, IngestStats& st) {
    const json& items = member(doc, "CVE_Items", "$", json::value_t::array);
    snap.schema = "nvd-json-1.1";
    snap.snapshot_date = optional_string(doc, "CVE_data_timestamp", "$");
    for (std::size_t i = 0; i < items.size(); ++i) {
        ++st.items;
        std::string p = fmt::format("$.CVE_Items[{}]", i);
        const json& item = items[i];
        const json& cve = member(item, "cve", p, json::value_t::object);
        const json& meta = member(cve, "CVE_data_meta", p + ".cve", json::value_t::object);
        CveRecord rec;
        rec.id = member(meta, "ID", p + ".cve.CVE_data_meta", json::value_t::string).get<std::string>();
        check_id(rec.id, p + ".cve.CVE_data_meta.ID");
        const json& desc = member(cve, "description", p + ".cve", json::value_t::object);
        rec.description = english(member(desc, "description_data", p + ".cve.description", json::value_t::array),
                                  p + ".cve.description.description_data", "lang", "value");
        rec.published = optional_string(item, "publishedDate", p);
        rec.modified = optional_string(item, "lastModifiedDate", p);
        std::vector<CpeEntry> cpes;
        if (const json* cfg = optional_member(item, "configurations", p, json::value_t::object)) {
            if (const json* nodes = optional_member(*cfg, "nodes", p + ".configurations", json::value_t::array))
                collect_nodes(*nodes, p + ".configurations.nodes", "cpe_match", "cpe23Uri", cpes);
        }
        finish_record(std::move(rec), cpes, snap.records, diag, st);
    }
}

void sort_records(std::vector<CveRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const CveRecord& a, const CveRecord& b) { return cve_id_less(a.id, b.id); });
}

std::pair<unsigned long long, unsigned long long> id_key(std::string_view id) {
    unsigned long long year = 0, seq = 0;
    if (id.size() > 9) {
        std::from_chars(id.data() + 4, id.data() + 8, year);
        std::from_chars(id.data() + 9, id.data() + id.size(), seq);
    }
    return {year, seq};
}

std::string version_text(const KernelVersion& v) { return v.to_string(); }

KernelVersion version_from(const json& j, const std::string& path) {
    if (!j.is_string()) throw SchemaError(path, "expected version string");
    auto v = parse_release(j.get<std::string>());
    if (!v) throw SchemaError(path, fmt::format("bad version '{}'", j.get<std::string>()));
    return *v;
}

}  // namespace

bool is_valid_cve_id(std::string_view id) {
    if (id.size() < 13 || !id.starts_with("CVE-") || id[8] != '-') return false;
    for (std::size_t i = 4; i < id.size(); ++i) {
        if (i == 8) continue;
        if (id[i] < '0' || id[i] > '9') return false;
    }
    return true;
}

bool cve_id_less(std::string_view a, std::string_view b) {
    auto ka = id_key(a), kb = id_key(b);
    if (ka != kb) return ka < kb;
    return a < b;
}

bool VersionConstraint::admits(const KernelVersion& v) const {
    if (exact) return v == *exact;
    if (start && (v < start->version || (v == start->version && !start->inclusive))) return false;
    if (end && (v > end->version || (v == end->version && !end->inclusive))) return false;
    return valid();
}

std::string VersionConstraint::to_string() const {
    if (exact) return "=" + exact->to_string();
    std::string out;
    if (start) out += fmt::format("{}{}", start->inclusive ? ">=" : ">", start->version.to_string());
    if (end) out += fmt::format("{}{}{}", out.empty() ? "" : " ", end->inclusive ? "<=" : "<", end->version.to_string());
    return out;
}

bool version_matches(const std::vector<VersionConstraint>& constraints, const KernelVersion& v) {
    return std::any_of(constraints.begin(), constraints.end(), [&](const VersionConstraint& c) { return c.admits(v); });
}

std::vector<CveRecord> version_filter(const NvdSnapshot& snapshot, const KernelVersion& v) {
    std::vector<CveRecord> out;
    for (const auto& r : snapshot.records)
        if (version_matches(r.constraints, v)) out.push_back(r);
    sort_records(out);
    return out;
}

NvdSnapshot ingest_nvd_feed(std::string_view text, std::string source, Diagnostics* diag, IngestStats* stats) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        // re-parse with exceptions for a located message
        try {
            doc = json::parse(text);
        } catch (const json::parse_error& e) {
            throw SchemaError("$", fmt::format("not valid JSON (byte {}): {}", e.byte, e.what()));
        }
    }
    if (!doc.is_object()) throw SchemaError("$", "expected an object at document root");
    NvdSnapshot snap;
    snap.source = std::move(source);
    IngestStats st;
    if (doc.contains("vulnerabilities")) ingest_v2(doc, snap, diag, st);
    else if (doc.contains("CVE_Items")) ingest_v11(doc, snap, diag, st);
    else throw SchemaError("$", "neither 'vulnerabilities' (API 2.0) nor 'CVE_Items' (feed 1.1) present");
    sort_records(snap.records);
    if (stats) *stats = st;
    return snap;
}

NvdSnapshot ingest_nvd_file(const fs::path& path, Diagnostics* diag, IngestStats* stats) {
    Bytes raw = read_file(path);
    if (has_signature(Compression::gzip, raw)) {
        Decoded d = decompress(Compression::gzip, raw, kMaxFeedSize);
        if (!d.complete) throw Error(fmt::format("{}: gzip stream unusable: {}", path.string(), d.error));
        raw = std::move(d.data);
    }
    return ingest_nvd_feed(as_chars(raw), path.filename().string(), diag, stats);
}

NvdSnapshot ingest_nvd_paths(const std::vector<fs::path>& paths, Diagnostics* diag) {
    std::vector<fs::path> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::directory_iterator(p)) {
                std::string name = e.path().filename().string();
                if (e.is_regular_file() && (name.ends_with(".json") || name.ends_with(".json.gz")))
                    found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }
    NvdSnapshot merged;
    std::map<std::string, CveRecord> by_id;
    std::vector<std::string> sources, schemas;
    for (const auto& f : files) {
        NvdSnapshot s = ingest_nvd_file(f, diag);
        sources.push_back(s.source);
        if (std::find(schemas.begin(), schemas.end(), s.schema) == schemas.end()) schemas.push_back(s.schema);
        merged.snapshot_date = std::max(merged.snapshot_date, s.snapshot_date);
        for (auto& r : s.records) {
            auto it = by_id.find(r.id);
            if (it == by_id.end() || it->second.modified <= r.modified) by_id[r.id] = std::move(r);
        }
    }
    for (auto& [id, r] : by_id) merged.records.push_back(std::move(r));
    sort_records(merged.records);
    for (const auto& s : sources) merged.source += (merged.source.empty() ? "" : ",") + s;
    for (const auto& s : schemas) merged.schema += (merged.schema.empty() ? "" : ",") + s;
    return merged;
}

std::string serialize_snapshot(const NvdSnapshot& snap) {
    json records = json::array();
    for (const auto& r : snap.records) {
        json cs = json::array();
        for (const auto& c : r.constraints) {
            json jc = json::object();
            if (c.exact) jc["exact"] = version_text(*c.exact);
            if (c.start) jc["start"] = {{"version", version_text(c.start->version)}, {"inclusive", c.start->inclusive}};
            if (c.end) jc["end"] = {{"version", version_text(c.end->version)}, {"inclusive", c.end->inclusive}};
            cs.push_back(std::move(jc));
        }
        records.push_back({{"id", r.id},
                           {"description", r.description},
                           {"published", r.published},
                           {"modified", r.modified},
                           {"constraints", std::move(cs)}});
    }
    json doc = {{"format", "kcve-nvd-snapshot"},
                {"format_version", 1},
                {"snapshot_date", snap.snapshot_date},
                {"source", snap.source},
                {"schema", snap.schema},
                {"records", std::move(records)}};
    return doc.dump(1) + "\n";
}

NvdSnapshot deserialize_snapshot(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw SchemaError("$", "snapshot is not a JSON object");
    if (doc.value("format", "") != "kcve-nvd-snapshot" || doc.value("format_version", 0) != 1)
        throw SchemaError("$.format", "not a version 1 kcve snapshot");
    NvdSnapshot snap;
    snap.snapshot_date = doc.value("snapshot_date", "");
    snap.source = doc.value("source", "");
    snap.schema = doc.value("schema", "");
    const json& records = member(doc, "records", "$", json::value_t::array);
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::string p = fmt::format("$.records[{}]", i);
        const json& jr = records[i];
        CveRecord r;
        r.id = member(jr, "id", p, json::value_t::string).get<std::string>();
        check_id(r.id, p + ".id");
        r.description = member(jr, "description", p, json::value_t::string).get<std::string>();
        r.published = optional_string(jr, "published", p);
        r.modified = optional_string(jr, "modified", p);
        const json& cs = member(jr, "constraints", p, json::value_t::array);
        for (std::size_t k = 0; k < cs.size(); ++k) {
            std::string cp = fmt::format("{}.constraints[{}]", p, k);
            const json& jc = cs[k];
            VersionConstraint c;
            if (jc.contains("exact")) c.exact = version_from(jc["exact"], cp + ".exact");
            for (const char* side : {"start", "end"}) {
                if (!jc.contains(side)) continue;
                std::string sp = cp + "." + side;
                VersionBound b{version_from(member(jc[side], "version", sp, json::value_t::string), sp + ".version"),
                               member(jc[side], "inclusive", sp, json::value_t::boolean).get<bool>()};
                (std::string_view(side) == "start" ? c.start : c.end) = b;
            }
            if (!c.valid()) throw SchemaError(cp, "constraint needs exact, or start and/or end");
            r.constraints.push_back(std::move(c));
        }
        if (r.constraints.empty()) throw SchemaError(p + ".constraints", "record without constraints");
        r.file_refs = extract_file_refs(r.description);
        snap.records.push_back(std::move(r));
    }
    sort_records(snap.records);
    return snap;
}

void save_snapshot(const NvdSnapshot& snapshot, const fs::path& path) { write_file(path, serialize_snapshot(snapshot)); }

NvdSnapshot load_snapshot(const fs::path& path) { return deserialize_snapshot(read_text_file(path)); }

}  // namespace kcve
