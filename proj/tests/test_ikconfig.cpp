#include "doctest.h"
#include "support.hpp"

#include "kcve/codec.hpp"
#include "kcve/errors.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/mime.hpp"

#include <zlib.h>

using namespace kcve;

namespace {

// Independent gzip encoder for the container fixtures: zlib's deflate with
// the gzip wrapper, not the library's own compress().
Bytes zlib_gzip(std::string_view text) {
    z_stream s{};
    REQUIRE(deflateInit2(&s, 9, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) == Z_OK);
    Bytes out(deflateBound(&s, text.size()) + 32);
    s.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(text.data()));
    s.avail_in = static_cast<uInt>(text.size());
    s.next_out = out.data();
    s.avail_out = static_cast<uInt>(out.size());
    REQUIRE(deflate(&s, Z_FINISH) == Z_STREAM_END);
    out.resize(s.total_out);
    deflateEnd(&s);
    return out;
}

std::string random_config(std::mt19937_64& rng, std::size_t n) {
    std::string out = "#\n# Automatically generated file; DO NOT EDIT.\n#\n";
    for (std::size_t i = 0; i < n; ++i) {
        std::string name = "CONFIG_OPT_" + std::to_string(i) + "_" + std::to_string(rng() % 1000);
        switch (rng() % 5) {
            case 0: out += name + "=y\n"; break;
            case 1: out += name + "=m\n"; break;
            case 2: out += "# " + name + " is not set\n"; break;
            case 3: out += name + "=" + std::to_string(rng() % 100000) + "\n"; break;
            default: out += name + "=\"v" + std::to_string(rng() % 100) + "\"\n"; break;
        }
    }
    return out;
}

}  // namespace

TEST_CASE("codec round trips") {
    std::string text = "CONFIG_BPF=y\n# CONFIG_IPV6 is not set\n";
    for (int i = 0; i < 200; ++i) text += "CONFIG_X" + std::to_string(i) + "=y\n";
    for (Compression c : kCompressionOrder) {
        if (!codec_available(c)) {
            MESSAGE("codec unavailable, skipped: " << to_string(c));
            continue;
        }
        CAPTURE(to_string(c));
        Bytes packed = compress(c, as_bytes(text));
        CHECK(detect_compression(packed) == c);
        Decoded d = decompress(c, packed);
        CHECK(d.complete);
        CHECK(as_chars(d.data) == text);

        // trailing garbage is ignored, truncation keeps the decoded prefix
        Bytes trailing = packed;
        testing::append(trailing, "garbage after the stream");
        CHECK(decompress(c, trailing).complete);
        Bytes cut(packed.begin(), packed.begin() + static_cast<std::ptrdiff_t>(packed.size() / 2));
        CHECK_FALSE(decompress(c, cut).complete);
    }
}

TEST_CASE("gzip decoder reads an independently produced stream") {
    std::string text = "CONFIG_BPF=y\n";
    Decoded d = decompress(Compression::gzip, zlib_gzip(text));
    CHECK(d.complete);
    CHECK(as_chars(d.data) == text);
}

TEST_CASE("decompress output cap") {
    std::string text(10000, 'a');
    Decoded d = decompress(Compression::gzip, zlib_gzip(text), 100);
    CHECK_FALSE(d.complete);
    CHECK(d.data.size() <= 100);
    CHECK_FALSE(d.error.empty());
}

TEST_CASE("find_containers lists signatures in offset order") {
    Bytes blob(100, 0x55);
    Bytes gz = zlib_gzip("hello");
    Bytes xz = compress(Compression::xz, as_bytes("hello"));
    testing::append(blob, gz);
    blob.resize(blob.size() + 20, 0x55);
    std::size_t xz_at = blob.size();
    testing::append(blob, xz);
    auto found = find_containers(blob);
    REQUIRE(found.size() >= 2);
    CHECK(found[0].offset == 100);
    CHECK(found[0].format == Compression::gzip);
    bool saw_xz = false;
    for (auto& c : found) saw_xz = saw_xz || (c.offset == xz_at && c.format == Compression::xz);
    CHECK(saw_xz);
    CHECK(find_containers(blob, 1).size() == 1);
}

TEST_CASE("parse_config") {
    Diagnostics diag;
    auto c = parse_config("CONFIG_BPF=y\n# CONFIG_IPV6 is not set\nCONFIG_CMDLINE=\"console=ttyS0\"\n"
                          "CONFIG_HZ=250\nCONFIG_BASE=0x1000\nCONFIG_USB=m\n# comment\n\nnot a directive\n",
                          &diag);
    CHECK(c.size() == 6);
    CHECK(*c.find("CONFIG_BPF") == ConfigValue::yes());
    CHECK(*c.find("CONFIG_IPV6") == ConfigValue::no());
    CHECK(*c.find("CONFIG_CMDLINE") == ConfigValue::string("console=ttyS0"));
    CHECK(c.find("CONFIG_HZ")->kind == ValueKind::integer);
    CHECK(c.find("CONFIG_BASE")->kind == ValueKind::hex);
    CHECK(c.enabled("CONFIG_USB"));
    CHECK_FALSE(c.enabled("CONFIG_IPV6"));
    CHECK_FALSE(c.enabled("CONFIG_MISSING"));
    CHECK(diag.warnings().size() == 1);

    Diagnostics dup;
    auto d = parse_config("CONFIG_BPF=y\nCONFIG_BPF=n\n", &dup);
    CHECK(*d.find("CONFIG_BPF") == ConfigValue::no());
    CHECK(dup.warnings().size() == 1);
}

TEST_CASE("serialize and reparse is the identity") {
    auto c = parse_config("CONFIG_CMDLINE=\"console=ttyS0 \\\"quoted\\\" back\\\\slash\"\nCONFIG_A=y\n# CONFIG_B is not set\n"
                          "CONFIG_C=m\nCONFIG_D=-5\nCONFIG_E=0xff\n");
    CHECK(c.find("CONFIG_CMDLINE")->text == "console=ttyS0 \"quoted\" back\\slash");
    auto again = parse_config(serialize_config(c));
    CHECK(again.options == c.options);

    std::mt19937_64 rng(testing::test_seed(3));
    for (int i = 0; i < 50; ++i) {
        auto r = parse_config(random_config(rng, 1 + rng() % 40));
        CHECK(parse_config(serialize_config(r)).options == r.options);
    }
}

TEST_CASE("extract_plaintext_config") {
    CHECK_FALSE(extract_plaintext_config(""));
    std::string fifty;
    for (int i = 0; i < 50; ++i) fifty += "CONFIG_OPT" + std::to_string(i) + "=y\n";
    auto c = extract_plaintext_config(fifty);
    REQUIRE(c);
    CHECK(c->size() == 50);
    CHECK(c->source_kind == ConfigSource::plaintext);

    std::string fortynine;
    for (int i = 0; i < 49; ++i) fortynine += "CONFIG_OPT" + std::to_string(i) + "=y\n";
    CHECK_FALSE(extract_plaintext_config(fortynine));
    CHECK(extract_plaintext_config("#\n# Automatically generated file; DO NOT EDIT.\n# Linux/arm64 4.19.0 Kernel "
                                   "Configuration\n#\nCONFIG_ARM64=y\n"));
    CHECK_FALSE(extract_plaintext_config("just some README text\nwith CONFIG_WORDS=maybe in it\n"));
}

TEST_CASE("classify_candidate") {
    CHECK(classify_candidate(as_bytes("CONFIG_X=y\n"), "text/plain") == CandidateKind::plain_text);
    Bytes ko = read_file(testing::fixture("elf/arm-linux-gnueabi.o"));
    CHECK(classify_candidate(ko, mime::kElfObject, "lib/modules/configs.ko") == CandidateKind::kernel_binary);
    Bytes jpeg = {0xff, 0xd8, 0xff, 0xe0, 0x00, 0x10, 'J', 'F', 'I', 'F', 0x00};
    CHECK(classify_candidate(jpeg, sniff_mime(jpeg, "photo.jpg"), "photo.jpg") == CandidateKind::other);
    CHECK(classify_candidate(zlib_gzip("x"), mime::kGzip) == CandidateKind::kernel_binary);
    Bytes blob(64, 0);
    testing::append(blob, "IKCFG_ST");
    CHECK(classify_candidate(blob, mime::kOctet) == CandidateKind::kernel_binary);
    CHECK(classify_candidate(Bytes(64, 1), mime::kOctet) == CandidateKind::other);
}

TEST_CASE("find_ikconfig") {
    std::string text = "CONFIG_BPF=y\n# CONFIG_IPV6 is not set\nCONFIG_HZ=100\n";
    std::mt19937_64 rng(testing::test_seed(5));

    SUBCASE("marker-wrapped gzip payload") {
        Bytes blob = testing::random_bytes(rng, 333);
        testing::append(blob, "IKCFG_ST");
        testing::append(blob, zlib_gzip(text));
        testing::append(blob, "IKCFG_ED");
        testing::append(blob, testing::random_bytes(rng, 77));
        auto m = find_ikconfig(blob);
        REQUIRE(m);
        CHECK(m->config.options == parse_config(text).options);
        CHECK(m->config.source_kind == ConfigSource::inline_string);
        CHECK(m->marker_offset == 333);
        CHECK(m->payload_format == Compression::gzip);
        CHECK_FALSE(m->container_offset);
    }
    SUBCASE("raw text payload") {
        Bytes blob(10, 0);
        testing::append(blob, "IKCFG_ST" + text + "IKCFG_ED");
        auto m = find_ikconfig(blob);
        REQUIRE(m);
        CHECK_FALSE(m->payload_format);
        CHECK(m->config.size() == 3);
    }
    SUBCASE("nothing to find") {
        CHECK_FALSE(find_ikconfig(testing::random_bytes(rng, 4096)));
        CHECK_FALSE(find_ikconfig({}));
    }
    SUBCASE("two-layer: marker inside a gzip-compressed image") {
        // compressible padding: random bytes would make deflate emit a
        // stored block with the markers visible in the outer layer
        Bytes inner(1000, 0x5a);
        testing::append(inner, "IKCFG_ST");
        testing::append(inner, zlib_gzip(text));
        testing::append(inner, "IKCFG_ED");
        Bytes image = {0x00, 0x11, 0x22};
        testing::append(image, zlib_gzip(as_chars(inner)));
        auto m = find_ikconfig(image);
        REQUIRE(m);
        CHECK(m->config.options == parse_config(text).options);
        CHECK(m->config.source_kind == ConfigSource::embedded_container);
        CHECK(m->container_offset == 3);
        CHECK(m->container_format == Compression::gzip);
    }
    SUBCASE("xz kernel image") {
        Bytes inner(200, 0x42);
        testing::append(inner, "IKCFG_ST");
        testing::append(inner, zlib_gzip(text));
        testing::append(inner, "IKCFG_ED");
        Bytes image(16, 0);
        testing::append(image, compress(Compression::xz, inner));
        auto m = find_ikconfig(image);
        REQUIRE(m);
        CHECK(m->container_format == Compression::xz);
    }
    SUBCASE("start marker without end marker") {
        Bytes blob(10, 0);
        testing::append(blob, "IKCFG_ST");
        testing::append(blob, zlib_gzip(text));
        CHECK_THROWS_AS(find_ikconfig(blob), ExtractionError);
    }
    SUBCASE("container depth is bounded") {
        Bytes inner;
        testing::append(inner, "IKCFG_ST" + text + "IKCFG_ED");
        Bytes twice = zlib_gzip(as_chars(zlib_gzip(as_chars(inner))));
        CHECK_FALSE(find_ikconfig(twice));
        IkconfigOptions deep;
        deep.max_depth = 2;
        CHECK(find_ikconfig(twice, deep));
    }
}
