#include "kcve/attribution.hpp"
#include "kcve/errors.hpp"

#include <algorithm>
#include <set>

namespace kcve {

namespace {

void add_flag(Verdict& v, std::string_view flag) {
    if (std::find(v.policy_flags.begin(), v.policy_flags.end(), flag) == v.policy_flags.end())
        v.policy_flags.emplace_back(flag);
}

}  // namespace

std::string_view to_string(VerdictClass c) {
    switch (c) {
        case VerdictClass::applicable_high: return "ApplicableHigh";
        case VerdictClass::not_applicable_high: return "NotApplicableHigh";
        case VerdictClass::applicable_medium: return "ApplicableMedium";
        case VerdictClass::applicable_low: return "ApplicableLow";
    }
    return "ApplicableLow";
}

std::optional<VerdictClass> verdict_class_from_string(std::string_view s) {
    for (VerdictClass c : kVerdictClasses)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

Verdict classify(const CveRecord& record, const WitnessSet& witnesses) {
    Verdict v;
    const auto& refs = record.file_refs;

    for (const auto& r : refs) {
        if (r.kind == RefKind::full_path && !r.is_header() && witnesses.contains(r.normalized))
            v.matched_refs.push_back({r, std::string(rule::kFullPath), {r.normalized}});
    }
    if (!v.matched_refs.empty()) {
        v.cls = VerdictClass::applicable_high;
        return v;
    }

    if (refs.empty()) {
        v.cls = VerdictClass::applicable_low;
        return v;
    }

    bool unwitnessed_full = false;
    for (const auto& r : refs) {
        if (r.kind == RefKind::file_only) {
            if (r.is_header()) {
                add_flag(v, policy::kFileOnlyHeader);
                continue;
            }
            auto paths = witnesses.paths_for_basename(r.normalized);
            if (!paths.empty()) v.matched_refs.push_back({r, std::string(rule::kBasename), {paths.begin(), paths.end()}});
        } else if (r.is_header()) {
            if (witnesses.directory_has_source(r.directory())) {
                v.matched_refs.push_back({r, std::string(rule::kHeaderDirectory), {}});
                add_flag(v, policy::kHeaderDirectory);
            }
        } else {
            unwitnessed_full = true;
            if (witnesses.has_basename(r.basename())) add_flag(v, policy::kFullPathBasenameIgnored);
        }
    }
    if (!v.matched_refs.empty()) {
        v.cls = VerdictClass::applicable_medium;
        bool via_basename = std::any_of(v.matched_refs.begin(), v.matched_refs.end(),
                                        [](const RefEvidence& e) { return e.rule == rule::kBasename; });
        if (unwitnessed_full && via_basename) add_flag(v, policy::kMixedRefs);
        return v;
    }
    v.cls = VerdictClass::not_applicable_high;
    return v;
}

AttributionReport attribute(std::vector<CveRecord> candidates, const WitnessSet& witnesses,
                            AttributionContext context) {
    AttributionReport rep;
    context.witnessed_files = witnesses.size();
    rep.context = std::move(context);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const CveRecord& a, const CveRecord& b) { return cve_id_less(a.id, b.id); });
    std::set<std::string> flags;
    for (auto& rec : candidates) {
        Verdict v = classify(rec, witnesses);
        ++rep.counts[index_of(v.cls)];
        flags.insert(v.policy_flags.begin(), v.policy_flags.end());
        rep.verdicts.push_back({std::move(rec), std::move(v)});
    }
    if (!rep.verdicts.empty())
        for (std::size_t i = 0; i < 4; ++i)
            rep.fractions[i] = static_cast<double>(rep.counts[i]) / static_cast<double>(rep.verdicts.size());
    rep.policy_flags.assign(flags.begin(), flags.end());
    return rep;
}

CorpusStats summarize_corpus(const std::vector<AttributionReport>& reports) {
    if (reports.empty()) throw PreconditionError("corpus summary needs at least one report");
    CorpusStats s;
    s.reports = reports.size();
    for (const auto& r : reports) {
        if (r.verdicts.empty()) {
            ++s.excluded_empty;
            continue;
        }
        s.firmware.push_back(r.context.firmware);
        s.per_report.push_back(r.fractions);
    }
    if (s.per_report.empty()) throw PreconditionError("corpus summary: every report has zero candidates");
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> col;
        for (const auto& f : s.per_report) col.push_back(f[c]);
        std::sort(col.begin(), col.end());
        s.medians[c] = col[(col.size() - 1) / 2];
    }
    return s;
}

}  // namespace kcve
