#include "kcve/attribution.hpp"
#include "kcve/errors.hpp"
#include "json_util.hpp"

#include <fmt/format.h>
#include <json.hpp>

using nlohmann::json;

namespace kcve {

// Identical guesses (e.g. one per userland ELF binary) are folded into one
// entry with a count and the first file.
json arch_json(const ArchVerdict& a) {
    json guesses = json::array();
    for (std::size_t i = 0; i < a.guesses.size();) {
        const ArchGuess& g = a.guesses[i];
        std::size_t j = i + 1;
        while (j < a.guesses.size() && a.guesses[j].family == g.family && a.guesses[j].bits == g.bits &&
               a.guesses[j].endianness == g.endianness && a.guesses[j].evidence == g.evidence &&
               a.guesses[j].variant == g.variant)
            ++j;
        guesses.push_back({{"family", g.family},
                           {"bits", g.bits ? json(g.bits) : json(nullptr)},
                           {"endianness", to_string(g.endianness)},
                           {"evidence", to_string(g.evidence)},
                           {"variant", g.variant},
                           {"file", g.file},
                           {"count", j - i}});
        i = j;
    }
    json resolved = nullptr;
    if (a.resolved)
        resolved = {{"family", a.resolved->family},
                    {"bits", a.resolved->bits ? json(a.resolved->bits) : json(nullptr)},
                    {"endianness", to_string(a.resolved->endianness)}};
    return {{"resolved", resolved}, {"guesses", guesses}};
}

namespace {

constexpr std::string_view kReportSchema = "kcve-attribution-report/1";

json class_map(const auto& values) {
    json out = json::object();
    for (VerdictClass c : kVerdictClasses) out[std::string(to_string(c))] = values[index_of(c)];
    return out;
}

std::string join_refs(const std::vector<FileRef>& refs) {
    std::string out;
    for (const auto& r : refs) out += (out.empty() ? "" : ",") + r.normalized;
    return out;
}

std::string tsv_cell(std::string s) {
    for (char& c : s)
        if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

std::string to_canonical_json(const AttributionReport& rep) {
    const auto& ctx = rep.context;
    json verdicts = json::array();
    for (const auto& cv : rep.verdicts) {
        json refs = json::array();
        for (const auto& r : cv.record.file_refs)
            refs.push_back({{"raw", r.raw}, {"kind", to_string(r.kind)}, {"normalized", r.normalized}});
        json matched = json::array();
        for (const auto& e : cv.verdict.matched_refs)
            matched.push_back({{"ref", e.ref.normalized}, {"kind", to_string(e.ref.kind)}, {"rule", e.rule},
                               {"witnessed", e.witnessed}});
        json constraints = json::array();
        for (const auto& c : cv.record.constraints) constraints.push_back(c.to_string());
        verdicts.push_back({{"id", cv.record.id},
                            {"verdict", to_string(cv.verdict.cls)},
                            {"filtered_out", cv.filtered_out()},
                            {"constraints", constraints},
                            {"file_refs", refs},
                            {"matched_refs", matched},
                            {"policy_flags", cv.verdict.policy_flags}});
    }
    json doc = {
        {"schema", kReportSchema},
        {"firmware", ctx.firmware},
        {"kernel", {{"version", ctx.kernel.to_string()}, {"mainline", ctx.kernel.numeric()}, {"file", ctx.kernel_file}}},
        {"arch", arch_json(ctx.arch)},
        {"config",
         {{"source_kind", to_string(ctx.config_source)}, {"origin", ctx.config_origin}, {"options", ctx.config_options}}},
        {"provenance",
         {{"tool_version", ctx.tool_version},
          {"nvd_snapshot_date", ctx.nvd_snapshot_date},
          {"nvd_source", ctx.nvd_source},
          {"kernel_source_url", ctx.kernel_source_url},
          {"kernel_source_sha256", ctx.kernel_source_sha256},
          {"witnessed_files", ctx.witnessed_files}}},
        {"summary", {{"candidates", rep.candidates()}, {"counts", class_map(rep.counts)}, {"fractions", class_map(rep.fractions)}}},
        {"policy_flags", rep.policy_flags},
        {"verdicts", verdicts},
    };
    return doc.dump(2) + "\n";
}

std::string to_tabular(const AttributionReport& rep) {
    std::string out = "cve_id\tverdict\tfiltered_out\tfile_refs\tevidence\tpolicy_flags\n";
    for (const auto& cv : rep.verdicts) {
        std::string evidence;
        for (const auto& e : cv.verdict.matched_refs) {
            std::string w;
            for (const auto& p : e.witnessed) w += (w.empty() ? "" : "|") + p;
            evidence += fmt::format("{}{}:{}{}", evidence.empty() ? "" : ",", e.rule, e.ref.normalized,
                                    w.empty() ? "" : "=" + w);
        }
        std::string flags;
        for (const auto& f : cv.verdict.policy_flags) flags += (flags.empty() ? "" : ",") + f;
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", cv.record.id, to_string(cv.verdict.cls),
                           cv.filtered_out() ? "yes" : "no", tsv_cell(join_refs(cv.record.file_refs)),
                           tsv_cell(evidence), flags);
    }
    return out;
}

AttributionReport report_from_json(std::string_view text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw SchemaError("$", "report is not a JSON object");
    if (doc.value("schema", "") != kReportSchema) throw SchemaError("$.schema", "not a kcve attribution report");
    AttributionReport rep;
    rep.context.firmware = doc.value("firmware", "");
    if (doc.contains("kernel")) {
        if (auto v = parse_release(doc["kernel"].value("version", ""))) rep.context.kernel = *v;
    }
    if (!doc.contains("verdicts") || !doc["verdicts"].is_array()) throw SchemaError("$.verdicts", "missing array");
    const json& vs = doc["verdicts"];
    for (std::size_t i = 0; i < vs.size(); ++i) {
        std::string p = fmt::format("$.verdicts[{}]", i);
        if (!vs[i].is_object()) throw SchemaError(p, "expected object");
        auto cls = verdict_class_from_string(vs[i].value("verdict", ""));
        if (!cls) throw SchemaError(p + ".verdict", "unknown verdict class");
        CveVerdict cv;
        cv.record.id = vs[i].value("id", "");
        cv.verdict.cls = *cls;
        ++rep.counts[index_of(*cls)];
        rep.verdicts.push_back(std::move(cv));
    }
    if (!rep.verdicts.empty())
        for (std::size_t c = 0; c < 4; ++c)
            rep.fractions[c] = static_cast<double>(rep.counts[c]) / static_cast<double>(rep.verdicts.size());
    return rep;
}

std::string to_json(const CorpusStats& s) {
    json per = json::array();
    for (std::size_t i = 0; i < s.per_report.size(); ++i)
        per.push_back({{"firmware", s.firmware[i]}, {"fractions", class_map(s.per_report[i])}});
    json doc = {{"reports", s.reports},
                {"excluded_empty", s.excluded_empty},
                {"median_fractions", class_map(s.medians)},
                {"per_report", per}};
    return doc.dump(2) + "\n";
}

}  // namespace kcve
