// Acceptance checks. One PASS/FAIL line per criterion; nonzero exit on any FAIL.

#include "support.hpp"

#include "kcve/attribution.hpp"
#include "kcve/codec.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/nvd.hpp"
#include "kcve/witness.hpp"

#include <fmt/core.h>
#include <zlib.h>

#include <algorithm>
#include <functional>
#include <set>
#include <tuple>

using namespace kcve;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
    void fail(std::string why) {
        if (ok) detail = std::move(why);
        ok = false;
    }
};

int failures = 0;

void criterion(int n, std::string_view title, double budget_s, const std::function<Outcome()>& body) {
    auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.fail(std::string("exception: ") + e.what());
    }
    double dt = testing::seconds_since(t0);
    if (dt >= budget_s) o.fail(fmt::format("took {:.3f}s, budget {}s", dt, budget_s));
    if (!o.ok) ++failures;
    fmt::print("{} criterion {}: {} ({:.3f}s){}{}\n", o.ok ? "PASS" : "FAIL", n, title, dt, o.detail.empty() ? "" : ": ",
               o.detail);
}

KernelVersion ver(unsigned a, unsigned b, unsigned c) { return KernelVersion{a, b, c, {}}; }

CveRecord make_record(std::string id, std::string desc, std::vector<VersionConstraint> cs = {}) {
    CveRecord r;
    r.id = std::move(id);
    r.description = std::move(desc);
    r.file_refs = extract_file_refs(r.description);
    r.constraints = std::move(cs);
    return r;
}

Bytes gzip(ByteView in) {
    z_stream s{};
    if (deflateInit2(&s, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) throw std::runtime_error("deflateInit2");
    Bytes out(deflateBound(&s, in.size()) + 32);
    s.next_in = const_cast<Bytef*>(in.data());
    s.avail_in = static_cast<uInt>(in.size());
    s.next_out = out.data();
    s.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&s, Z_FINISH);
    deflateEnd(&s);
    if (rc != Z_STREAM_END) throw std::runtime_error("deflate");
    out.resize(s.total_out);
    return out;
}

// ---- criterion 1 ----

Outcome example_cve() {
    Outcome o;
    VersionConstraint c;
    c.start = VersionBound{ver(4, 9, 0), true};
    c.end = VersionBound{ver(4, 9, 71), true};
    auto rec = make_record("CVE-2017-17863",
                           "kernel/bpf/verifier.c in the Linux kernel through 4.14.8 ignores unreachable code, even "
                           "though it would still be processed by JIT compilers.",
                           {c});
    if (!version_matches(rec.constraints, ver(4, 9, 60))) o.fail("4.9.60 outside the affected range");
    WitnessSet without, with;
    for (auto p : {"init/main.c", "kernel/fork.c", "net/core/dev.c"}) {
        without.insert(p);
        with.insert(p);
    }
    with.insert("kernel/bpf/verifier.c");
    auto a = classify(rec, without).cls;
    auto b = classify(rec, with).cls;
    if (a != VerdictClass::not_applicable_high) o.fail(fmt::format("without verifier.c: {}", to_string(a)));
    if (b != VerdictClass::applicable_high) o.fail(fmt::format("with verifier.c: {}", to_string(b)));
    return o;
}

// ---- criterion 2 ----

std::string random_config(std::mt19937_64& rng) {
    std::string out = "#\n# Automatically generated file; DO NOT EDIT.\n# Linux/arm 4.9.60 Kernel Configuration\n#\n";
    std::size_t n = 20 + rng() % 400;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = fmt::format("CONFIG_K{}_{}", i, rng() % 100000);
        switch (rng() % 6) {
            case 0: out += name + "=y\n"; break;
            case 1: out += name + "=m\n"; break;
            case 2: out += "# " + name + " is not set\n"; break;
            case 3: out += fmt::format("{}={}\n", name, rng() % 1000000); break;
            case 4: out += fmt::format("{}=0x{:x}\n", name, rng() % 0xffffff); break;
            default: out += fmt::format("{}=\"s{} t\"\n", name, rng() % 1000); break;
        }
    }
    return out;
}

Outcome ikconfig_recovery() {
    Outcome o;
    std::mt19937_64 rng(testing::test_seed(2024));
    int plain_hits = 0, nested_hits = 0;
    for (int i = 0; i < 100; ++i) {
        std::string text = random_config(rng);
        Bytes image = testing::random_bytes(rng, 64 + rng() % 8192);
        testing::append(image, kIkconfigStart);
        testing::append(image, gzip(as_bytes(text)));
        testing::append(image, kIkconfigEnd);
        testing::append(image, testing::random_bytes(rng, rng() % 8192));

        auto expect = parse_config(text);
        auto check = [&](ByteView blob, int& hits, const char* what) {
            auto m = find_ikconfig(blob);
            if (!m) return o.fail(fmt::format("config {} ({}): not found", i, what));
            if (m->config.options != expect.options) return o.fail(fmt::format("config {} ({}): options differ", i, what));
            ++hits;
        };
        check(image, plain_hits, "raw");
        Bytes outer = testing::random_bytes(rng, rng() % 512);
        testing::append(outer, gzip(image));
        check(outer, nested_hits, "nested");
    }
    o.detail = fmt::format("{}/100 raw, {}/100 nested", plain_hits, nested_hits);
    return o;
}

// ---- criterion 3 ----

// Independent reading of a constraint: lexicographic tuple comparison.
bool oracle_admits(const VersionConstraint& c, std::tuple<unsigned, unsigned, unsigned> v) {
    auto t = [](const KernelVersion& k) { return std::make_tuple(k.major, k.minor, k.patch); };
    if (c.exact) return t(*c.exact) == v;
    if (c.start && (c.start->inclusive ? v < t(c.start->version) : v <= t(c.start->version))) return false;
    if (c.end && (c.end->inclusive ? v > t(c.end->version) : v >= t(c.end->version))) return false;
    return bool(c.start || c.end);
}

Outcome version_matching() {
    Outcome o;
    std::mt19937_64 rng(testing::test_seed(7));
    auto rv = [&] { return ver(rng() % 6, rng() % 21, rng() % 100); };
    long checked = 0;
    for (int i = 0; i < 1000 && o.ok; ++i) {
        std::vector<VersionConstraint> cs(rng() % 4);
        for (auto& c : cs) {
            switch (rng() % 4) {
                case 0: c.exact = rv(); break;
                case 1: c.start = VersionBound{rv(), rng() % 2 == 0}; break;
                case 2: c.end = VersionBound{rv(), rng() % 2 == 0}; break;
                default:
                    c.start = VersionBound{rv(), rng() % 2 == 0};
                    c.end = VersionBound{rv(), rng() % 2 == 0};
            }
        }
        for (unsigned a = 0; a <= 5; ++a)
            for (unsigned b = 0; b <= 20; ++b)
                for (unsigned p = 0; p <= 99; ++p) {
                    bool want = std::any_of(cs.begin(), cs.end(), [&](auto& c) { return oracle_admits(c, {a, b, p}); });
                    if (version_matches(cs, ver(a, b, p)) != want) {
                        o.fail(fmt::format("set {} disagrees at {}.{}.{}", i, a, b, p));
                        a = b = 1000;
                        break;
                    }
                    ++checked;
                }
    }
    if (o.ok) o.detail = fmt::format("{} points agree", checked);
    return o;
}

// ---- criterion 4 ----

Outcome reference_partition() {
    Outcome o;
    auto snap = ingest_nvd_file(testing::fixture("nvd/kernel_snapshot.json.gz"));
    std::size_t n[3] = {0, 0, 0};
    for (const auto& r : snap.records) ++n[static_cast<int>(reference_class(r))];
    std::size_t total = snap.records.size();
    if (total == 0) {
        o.fail("empty snapshot");
        return o;
    }
    if (n[0] + n[1] + n[2] != total) o.fail("partition does not cover the snapshot");
    const double target[3] = {59.90, 4.43, 35.67};
    double pct[3];
    for (int i = 0; i < 3; ++i) {
        pct[i] = 100.0 * double(n[i]) / double(total);
        if (std::abs(pct[i] - target[i]) > 10.0) o.fail(fmt::format("class {} at {:.2f}%, target {:.2f}%", i, pct[i], target[i]));
    }
    double sum = double(n[0]) / total + double(n[1]) / total + double(n[2]) / total;
    if (std::abs(sum - 1.0) > 1e-12) o.fail(fmt::format("fractions sum to {}", sum));
    if (o.ok)
        o.detail = fmt::format("{} records: full-path {:.2f}%, file-only {:.2f}%, none {:.2f}%", total, pct[0], pct[1], pct[2]);
    return o;
}

// ---- criterion 5 ----

VerdictClass oracle_class(const CveRecord& r, const WitnessSet& w) {
    auto header = [](const std::string& s) { return s.ends_with(".h"); };
    auto base = [](const std::string& s) { return s.substr(s.rfind('/') + 1); };
    auto dir = [](const std::string& s) { return s.substr(0, s.rfind('/')); };
    for (const auto& f : r.file_refs)
        if (f.kind == RefKind::full_path && !header(f.normalized) && w.files().count(f.normalized))
            return VerdictClass::applicable_high;
    if (r.file_refs.empty()) return VerdictClass::applicable_low;
    for (const auto& f : r.file_refs) {
        for (const auto& p : w.files()) {
            if (f.kind == RefKind::file_only && !header(f.normalized) && base(p) == f.normalized)
                return VerdictClass::applicable_medium;
            if (f.kind == RefKind::full_path && header(f.normalized) && p.find('/') != std::string::npos &&
                dir(p) == dir(f.normalized))
                return VerdictClass::applicable_medium;
        }
    }
    return VerdictClass::not_applicable_high;
}

Outcome classification_properties() {
    Outcome o;
    std::mt19937_64 rng(testing::test_seed(99));
    const std::vector<std::string> dirs = {"kernel", "kernel/bpf", "net/core", "net/ipv4", "drivers/usb/core",
                                           "include/linux", "fs/ext4", "arch/arm/mm"};
    const std::vector<std::string> names = {"verifier", "dev", "sock", "main", "core", "inode", "hub", "tcp_input"};
    const std::vector<std::string> exts = {".c", ".h", ".S"};
    auto file = [&] { return names[rng() % names.size()] + exts[rng() % exts.size()]; };
    auto path = [&] { return dirs[rng() % dirs.size()] + "/" + file(); };
    std::array<std::size_t, 4> seen{};
    for (int i = 0; i < 10000 && o.ok; ++i) {
        std::string desc = "Issue";
        for (std::size_t k = rng() % 4; k > 0; --k) desc += " affecting " + (rng() % 3 ? path() : file());
        auto rec = make_record(fmt::format("CVE-2021-{}", i), desc);
        WitnessSet w;
        for (std::size_t k = rng() % 12; k > 0; --k) w.insert(rng() % 4 ? path() : dirs[rng() % dirs.size()] + "/x.c");
        WitnessSet more = w;
        for (std::size_t k = 1 + rng() % 6; k > 0; --k) more.insert(path());

        auto v = classify(rec, w).cls;
        auto after = classify(rec, more).cls;
        int hits = 0;
        for (auto c : kVerdictClasses) hits += (c == v);
        if (hits != 1) o.fail(fmt::format("case {}: {} classes", i, hits));
        if (v != oracle_class(rec, w)) o.fail(fmt::format("case {}: {} vs oracle {}", i, to_string(v), to_string(oracle_class(rec, w))));
        if (v != VerdictClass::not_applicable_high && after == VerdictClass::not_applicable_high)
            o.fail(fmt::format("case {}: adding witnesses turned {} into NotApplicableHigh", i, to_string(v)));
        if (v == VerdictClass::applicable_high && after != VerdictClass::applicable_high)
            o.fail(fmt::format("case {}: adding witnesses lost ApplicableHigh", i));
        ++seen[index_of(v)];
    }
    for (auto c : kVerdictClasses)
        if (seen[index_of(c)] == 0) o.fail(fmt::format("generator never produced {}", to_string(c)));
    if (o.ok) o.detail = fmt::format("class mix {}/{}/{}/{}", seen[0], seen[1], seen[2], seen[3]);
    return o;
}

// ---- criterion 6 ----

Outcome build_log_recovery() {
    Outcome o;
    std::mt19937_64 rng(testing::test_seed(6));
    std::vector<std::string> lines;
    std::set<std::string> expect;
    const std::vector<std::string> top = {"kernel", "mm", "net", "drivers", "fs", "arch/mips/kernel", "lib", "crypto"};
    while (expect.size() < 1000) {
        std::string stem = fmt::format("{}/sub{}/f{}", top[rng() % top.size()], rng() % 40, rng() % 100000);
        bool asm_src = rng() % 5 == 0;
        std::string src = stem + (asm_src ? ".S" : ".c");
        if (!expect.insert(src).second) continue;
        switch (rng() % 3) {
            case 0:
                lines.push_back(fmt::format("  mipsel-linux-gcc -Wp,-MD,{}.o.d -nostdinc -Iinclude -D__KERNEL__ -O2 -c -o {}.o {}",
                                            stem, stem, src));
                break;
            case 1: lines.push_back(fmt::format("  {}      {}.o", asm_src ? "AS" : "CC", stem)); break;
            default: lines.push_back(fmt::format("gcc -D__KERNEL__ -c {} -o {}.o", src, stem)); break;
        }
        if (rng() % 4 == 0) lines.push_back("make -f ./scripts/Makefile.build obj=" + top[rng() % top.size()]);
    }
    auto join = [](const std::vector<std::string>& ls) {
        std::string s;
        for (auto& l : ls) s += l + "\n";
        return s;
    };
    auto a = parse_build_log(join(lines));
    std::shuffle(lines.begin(), lines.end(), rng);
    auto b = parse_build_log(join(lines));
    if (a.files() != expect)
        o.fail(fmt::format("recovered {} paths, {} expected", a.size(), expect.size()));
    if (!(a == b)) o.fail("permuted log gives a different set");
    if (o.ok) o.detail = fmt::format("{} paths", a.size());
    return o;
}

// ---- criterion 7 ----

AttributionReport hand_report(std::string name, std::array<std::size_t, 4> counts) {
    std::vector<CveRecord> recs;
    WitnessSet w;
    w.insert("kernel/a.c");
    int n = 0;
    auto add = [&](std::size_t k, const char* desc) {
        for (std::size_t i = 0; i < k; ++i) recs.push_back(make_record(fmt::format("CVE-2020-{}", ++n), desc));
    };
    add(counts[0], "bug in kernel/a.c");
    add(counts[1], "bug in kernel/zzz.c");
    add(counts[2], "bug in a.c");
    add(counts[3], "bug somewhere");
    AttributionContext ctx;
    ctx.firmware = std::move(name);
    return attribute(std::move(recs), w, ctx);
}

Outcome corpus_medians() {
    Outcome o;
    // NotApplicableHigh fractions 0.6, 0.68, 0.7
    auto stats = summarize_corpus({hand_report("a", {10, 30, 5, 5}), hand_report("b", {4, 17, 2, 2}),
                                   hand_report("c", {1, 7, 1, 1})});
    const std::array<double, 4> want = {0.16, 0.68, 0.1, 0.1};
    for (auto c : kVerdictClasses) {
        auto i = index_of(c);
        if (stats.medians[i] != want[i]) o.fail(fmt::format("{} median {} != {}", to_string(c), stats.medians[i], want[i]));
    }
    if (stats.reports != 3) o.fail(fmt::format("{} reports counted", stats.reports));
    return o;
}

}  // namespace

int main() {
    criterion(1, "CVE-2017-17863 on 4.9.60 follows the verifier.c witness", 1, example_cve);
    criterion(2, "embedded configuration recovered from random images", 30, ikconfig_recovery);
    criterion(3, "version matching agrees with brute force", 60, version_matching);
    criterion(4, "reference-class partition of the kernel snapshot", 60, reference_partition);
    criterion(5, "exactly one class and monotone in witnesses", 60, classification_properties);
    criterion(6, "build-log witnesses recovered and order independent", 5, build_log_recovery);
    criterion(7, "corpus medians over hand-built reports", 60, corpus_medians);
    return failures == 0 ? 0 : 1;
}
