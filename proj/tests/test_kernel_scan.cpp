#include "doctest.h"
#include "support.hpp"

#include "kcve/errors.hpp"
#include "kcve/kernel_scan.hpp"
#include "kcve/mime.hpp"
#include "kcve/version.hpp"

#include <fstream>
#include <regex>

using namespace kcve;
namespace fs = std::filesystem;

namespace {

std::string wide(std::string_view s) {
    std::string out;
    for (char c : s) {
        out.push_back(c);
        out.push_back('\0');
    }
    return out;
}

void write_bytes(const fs::path& p, std::string_view content) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
}

}  // namespace

TEST_CASE("parse_kernel_version") {
    auto v = parse_kernel_version("Linux version 4.9.71");
    CHECK(v.major == 4);
    CHECK(v.minor == 9);
    CHECK(v.patch == 71);
    CHECK(v.suffix.empty());

    v = parse_kernel_version("Linux version 0.0.0");
    CHECK(v == KernelVersion{0, 0, 0, {}});

    v = parse_kernel_version("Linux version 3.4.0-g12ab");
    CHECK(v.major == 3);
    CHECK(v.minor == 4);
    CHECK(v.patch == 0);
    CHECK(v.suffix == "-g12ab");
    CHECK(v.to_string() == "3.4.0-g12ab");
    CHECK(v.numeric() == "3.4.0");

    CHECK(parse_kernel_version("LINUX VERSION 2.6.36").minor == 6);
    CHECK_THROWS_AS(parse_kernel_version("Linux version 4.9"), ParseError);
    CHECK_THROWS_AS(parse_kernel_version("Linux version 4.9.60 trailing"), ParseError);
    CHECK_THROWS_AS(parse_kernel_version("version 4.9.60"), ParseError);
}

TEST_CASE("parse_release") {
    CHECK(parse_release("4.9") == KernelVersion{4, 9, 0, {}});
    CHECK(parse_release("4.9.71") == KernelVersion{4, 9, 71, {}});
    auto rc = parse_release("3.0-rc1");
    REQUIRE(rc);
    CHECK(rc->suffix == "-rc1");
    auto four = parse_release("2.6.32.27");
    REQUIRE(four);
    CHECK(*four == KernelVersion{2, 6, 32, {}});
    CHECK(four->suffix == ".27");
    CHECK_FALSE(parse_release(""));
    CHECK_FALSE(parse_release("abc"));
}

TEST_CASE("version ordering ignores the suffix, exact dedup does not") {
    auto a = *parse_release("4.9.60-a");
    auto b = *parse_release("4.9.60-b");
    CHECK(a == b);
    CHECK_FALSE(same_build(a, b));
    CHECK(ExactVersionLess{}(a, b));
    CHECK(*parse_release("4.9.9") < *parse_release("4.9.10"));
    CHECK(*parse_release("4.10.0") > *parse_release("4.9.99"));
}

TEST_CASE("signature matcher agrees with std::regex") {
    // Independent route: ECMAScript regex with backtracking, anchored at pos.
    const std::regex re(R"(Linux version \d\.\d{1,2}\.\d{1,3}(-[\w.-]+)?)", std::regex::icase);
    std::mt19937_64 rng(testing::test_seed(7));
    const std::string alphabet = "Linux version 0123456789.-_abgLX \n";
    const std::vector<std::string> seeds = {"Linux version ", "linux VERSION ", "Linux version 4.", "Linux version 4.19.",
                                            "Linux version 12.1.1", "Linux version 4.9.600"};
    for (int i = 0; i < 3000; ++i) {
        std::string s = seeds[rng() % seeds.size()];
        std::size_t extra = rng() % 16;
        for (std::size_t k = 0; k < extra; ++k) s.push_back(alphabet[rng() % alphabet.size()]);
        std::smatch m;
        std::size_t expected = std::regex_search(s, m, re, std::regex_constants::match_continuous) ? m.length(0) : 0;
        INFO(s);
        CHECK(match_version_signature(s, 0) == expected);
    }
}

TEST_CASE("scan_file_for_kernel_version") {
    SUBCASE("single banner") {
        std::string blob = std::string("\x7f\x01\x02", 3) + "Linux version 4.9.60 (gcc version 4.8.3) #1 SMP";
        auto hits = scan_file_for_kernel_version(as_bytes(blob), mime::kOctet);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].version == KernelVersion{4, 9, 60, {}});
        CHECK(hits[0].offset == 3);
        CHECK(hits[0].raw == "Linux version 4.9.60");
    }
    SUBCASE("empty blob") { CHECK(scan_file_for_kernel_version({}, mime::kOctet).empty()); }
    SUBCASE("corpus range endpoints") {
        std::string blob = std::string("\0\0", 2) + "Linux version 2.4.20" + std::string(40, '\xff') +
                           "Linux version 4.4.60";
        auto hits = scan_file_for_kernel_version(as_bytes(blob), mime::kOctet);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].version.to_string() == "2.4.20");
        CHECK(hits[1].version.to_string() == "4.4.60");
    }
    SUBCASE("text media types never match") {
        std::string blob = "Linux version 4.4.60";
        CHECK(scan_file_for_kernel_version(as_bytes(blob), "text/plain").empty());
        CHECK(scan_file_for_kernel_version(as_bytes(blob), "text/x-shellscript").empty());
        CHECK(scan_file_for_kernel_version(as_bytes(blob), mime::kOctet).size() == 1);
    }
    SUBCASE("utf-16le banner is found at the same content") {
        std::string narrow = "Linux version 5.4.0-rc2";
        std::string blob = std::string("\x01\x02\x03", 3) + wide(narrow) + std::string("\0\0", 2);
        auto hits = scan_file_for_kernel_version(as_bytes(blob), mime::kOctet);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].encoding == TextEncoding::utf16le);
        CHECK(hits[0].raw == narrow);
        CHECK(hits[0].offset == 3);
        CHECK(hits[0].byte_length() == 2 * narrow.size());
        CHECK(hits[0].version.suffix == "-rc2");
    }
    SUBCASE("leftmost-longest, scanning resumes after the match") {
        std::string blob = "\x01Linux version 4.9.60-abc.def-1 Linux version 4.9.61";
        auto hits = scan_file_for_kernel_version(as_bytes(blob), mime::kOctet);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].version.suffix == "-abc.def-1");
        CHECK(hits[1].version.patch == 61);
    }
}

TEST_CASE("property: forced text mime yields no hits") {
    std::mt19937_64 rng(testing::test_seed(11));
    for (int i = 0; i < 200; ++i) {
        Bytes b = testing::random_bytes(rng, rng() % 256);
        testing::append(b, "Linux version 4.9.60");
        CHECK(scan_file_for_kernel_version(b, "text/plain").empty());
        CHECK_FALSE(scan_file_for_kernel_version(b, mime::kOctet).empty());
    }
}

TEST_CASE("property: ascii and utf-16le twins give the same versions") {
    std::mt19937_64 rng(testing::test_seed(13));
    for (int i = 0; i < 200; ++i) {
        std::string banner = "Linux version " + std::to_string(rng() % 10) + "." + std::to_string(rng() % 100) + "." +
                             std::to_string(rng() % 1000);
        std::string pad(1 + rng() % 8, '\x01');
        auto a = scan_file_for_kernel_version(as_bytes(pad + banner + pad), mime::kOctet);
        auto w = scan_file_for_kernel_version(as_bytes(pad + wide(banner) + pad), mime::kOctet);
        REQUIRE(a.size() == 1);
        REQUIRE(w.size() == 1);
        CHECK(a[0].raw == w[0].raw);
        CHECK(same_build(a[0].version, w[0].version));
    }
}

TEST_CASE("sniff_mime") {
    CHECK(sniff_mime(as_bytes(std::string("\x7f" "ELF\x01\x01\x01", 7))).find("application/") == 0);
    CHECK(sniff_mime(as_bytes(std::string("\x1f\x8b\x08\x00\x00\x00\x00\x00\x00\x03", 10))) == mime::kGzip);
    CHECK(sniff_mime(as_bytes(std::string("\x1f\x8b\x08\x00", 4))) != mime::kGzip);
    CHECK(sniff_mime(as_bytes(std::string("\xfd" "7zXZ\x00", 6))) == mime::kXz);
    CHECK(sniff_mime(as_bytes(std::string("\xd0\x0d\xfe\xed", 4))) == mime::kDeviceTree);
    CHECK(sniff_mime(as_bytes("CONFIG_BPF=y\n")) == mime::kText);
    CHECK(sniff_mime(as_bytes("#!/bin/sh\necho hi\n")) == mime::kShell);
    CHECK(sniff_mime(as_bytes(std::string("\x00\x01\x02\xff", 4))) == mime::kOctet);
    CHECK(sniff_mime({}) == mime::kEmpty);
    CHECK(is_text_mime("text/html"));
    CHECK_FALSE(is_text_mime(mime::kOctet));
}

TEST_CASE("scan_tree") {
    testing::TempDir dir;
    SUBCASE("one kernel image") {
        write_bytes(dir / "boot/uImage", std::string("\x00\x01\x02", 3) + "Linux version 4.9.60 (build@host)");
        auto inv = scan_tree(dir.path());
        REQUIRE(inv.hits.size() == 1);
        CHECK(inv.hits[0].path == "boot/uImage");
        REQUIRE(inv.distinct_versions.size() == 1);
        CHECK(inv.distinct_versions[0].to_string() == "4.9.60");
    }
    SUBCASE("empty directory") {
        auto inv = scan_tree(dir.path());
        CHECK(inv.hits.empty());
        CHECK(inv.distinct_versions.empty());
    }
    SUBCASE("plain text banner is excluded") {
        write_bytes(dir / "etc/banner.txt", "Linux version 4.4.60\n");
        auto inv = scan_tree(dir.path());
        CHECK(inv.hits.empty());
        CHECK(inv.mime_types.at("etc/banner.txt") == "text/plain");
    }
    SUBCASE("distinct versions keep suffixes apart and are deterministic") {
        write_bytes(dir / "a.bin", std::string("\x00", 1) + "Linux version 4.9.60-a");
        write_bytes(dir / "b.bin", std::string("\x00", 1) + "Linux version 4.9.60-b");
        write_bytes(dir / "c.bin", std::string("\x00", 1) + "Linux version 4.9.60-a");
        auto one = scan_tree(dir.path());
        ScanOptions serial;
        serial.workers = 1;
        auto two = scan_tree(dir.path(), serial);
        CHECK(one.hits.size() == 3);
        CHECK(one.distinct_versions.size() == 2);
        REQUIRE(one.hits.size() == two.hits.size());
        for (std::size_t i = 0; i < one.hits.size(); ++i) {
            CHECK(one.hits[i].path == two.hits[i].path);
            CHECK(one.hits[i].offset == two.hits[i].offset);
        }
    }
    SUBCASE("size limit skips with a warning") {
        write_bytes(dir / "big.bin", std::string("\x00", 1) + "Linux version 4.9.60" + std::string(100, '\x01'));
        ScanOptions o;
        o.max_file_size = 16;
        auto inv = scan_tree(dir.path(), o);
        CHECK(inv.hits.empty());
        CHECK(inv.warnings.size() == 1);
    }
    SUBCASE("single file root") {
        write_bytes(dir / "vmlinux", std::string("\x00", 1) + "Linux version 3.4.0");
        auto inv = scan_tree(dir / "vmlinux");
        REQUIRE(inv.hits.size() == 1);
        CHECK(inv.hits[0].path == "vmlinux");
    }
    SUBCASE("missing root throws") { CHECK_THROWS_AS(scan_tree(dir / "nope"), Error); }
}
