#include "kcve/codec.hpp"
#include "kcve/errors.hpp"

#include <dlfcn.h>
#include <lzma.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace kcve {

namespace {

constexpr std::size_t kChunk = 1 << 16;

// ---------------------------------------------------------------------------
// Runtime-resolved codecs. Only the handful of entry points used here are
// declared; their ABIs have been stable for well over a decade.

struct BzStream {
    char* next_in;
    unsigned int avail_in;
    unsigned int total_in_lo32;
    unsigned int total_in_hi32;
    char* next_out;
    unsigned int avail_out;
    unsigned int total_out_lo32;
    unsigned int total_out_hi32;
    void* state;
    void* (*bzalloc)(void*, int, int);
    void (*bzfree)(void*, void*);
    void* opaque;
};
constexpr int kBzOk = 0;
constexpr int kBzStreamEnd = 4;

struct ZstdInBuffer {
    const void* src;
    std::size_t size;
    std::size_t pos;
};
struct ZstdOutBuffer {
    void* dst;
    std::size_t size;
    std::size_t pos;
};

constexpr unsigned kLz4fVersion = 100;

class SharedLib {
public:
    explicit SharedLib(std::initializer_list<const char*> names) {
        for (const char* n : names) {
            handle_ = dlopen(n, RTLD_NOW | RTLD_LOCAL);
            if (handle_) break;
        }
    }
    SharedLib(const SharedLib&) = delete;
    SharedLib& operator=(const SharedLib&) = delete;
    ~SharedLib() {
        if (handle_) dlclose(handle_);
    }

    template <typename Fn>
    Fn symbol(const char* name) const {
        return handle_ ? reinterpret_cast<Fn>(dlsym(handle_, name)) : nullptr;
    }

private:
    void* handle_ = nullptr;
};

struct Bz2Api {
    int (*decompress_init)(BzStream*, int, int) = nullptr;
    int (*decompress)(BzStream*) = nullptr;
    int (*decompress_end)(BzStream*) = nullptr;
    int (*buff_compress)(char*, unsigned*, char*, unsigned, int, int, int) = nullptr;
    bool ok() const { return decompress_init && decompress && decompress_end && buff_compress; }
};

struct ZstdApi {
    void* (*create_dstream)() = nullptr;
    std::size_t (*free_dstream)(void*) = nullptr;
    std::size_t (*init_dstream)(void*) = nullptr;
    std::size_t (*decompress_stream)(void*, ZstdOutBuffer*, ZstdInBuffer*) = nullptr;
    unsigned (*is_error)(std::size_t) = nullptr;
    const char* (*error_name)(std::size_t) = nullptr;
    std::size_t (*compress)(void*, std::size_t, const void*, std::size_t, int) = nullptr;
    std::size_t (*compress_bound)(std::size_t) = nullptr;
    bool ok() const {
        return create_dstream && free_dstream && init_dstream && decompress_stream && is_error &&
               error_name && compress && compress_bound;
    }
};

struct Lz4Api {
    int (*decompress_safe)(const char*, char*, int, int) = nullptr;
    int (*compress_default)(const char*, char*, int, int) = nullptr;
    int (*compress_bound)(int) = nullptr;
    std::size_t (*create_dctx)(void**, unsigned) = nullptr;
    std::size_t (*free_dctx)(void*) = nullptr;
    std::size_t (*frame_decompress)(void*, void*, std::size_t*, const void*, std::size_t*,
                                    const void*) = nullptr;
    unsigned (*is_error)(std::size_t) = nullptr;
    bool ok() const {
        return decompress_safe && compress_default && compress_bound && create_dctx &&
               free_dctx && frame_decompress && is_error;
    }
};

const Bz2Api& bz2() {
    static SharedLib lib{"libbz2.so.1", "libbz2.so.1.0", "libbz2.so"};
    static const Bz2Api api = [] {
        Bz2Api a;
        a.decompress_init = lib.symbol<decltype(a.decompress_init)>("BZ2_bzDecompressInit");
        a.decompress = lib.symbol<decltype(a.decompress)>("BZ2_bzDecompress");
        a.decompress_end = lib.symbol<decltype(a.decompress_end)>("BZ2_bzDecompressEnd");
        a.buff_compress = lib.symbol<decltype(a.buff_compress)>("BZ2_bzBuffToBuffCompress");
        return a;
    }();
    return api;
}

const ZstdApi& zstd() {
    static SharedLib lib{"libzstd.so.1", "libzstd.so"};
    static const ZstdApi api = [] {
        ZstdApi a;
        a.create_dstream = lib.symbol<decltype(a.create_dstream)>("ZSTD_createDStream");
        a.free_dstream = lib.symbol<decltype(a.free_dstream)>("ZSTD_freeDStream");
        a.init_dstream = lib.symbol<decltype(a.init_dstream)>("ZSTD_initDStream");
        a.decompress_stream = lib.symbol<decltype(a.decompress_stream)>("ZSTD_decompressStream");
        a.is_error = lib.symbol<decltype(a.is_error)>("ZSTD_isError");
        a.error_name = lib.symbol<decltype(a.error_name)>("ZSTD_getErrorName");
        a.compress = lib.symbol<decltype(a.compress)>("ZSTD_compress");
        a.compress_bound = lib.symbol<decltype(a.compress_bound)>("ZSTD_compressBound");
        return a;
    }();
    return api;
}

const Lz4Api& lz4() {
    static SharedLib lib{"liblz4.so.1", "liblz4.so"};
    static const Lz4Api api = [] {
        Lz4Api a;
        a.decompress_safe = lib.symbol<decltype(a.decompress_safe)>("LZ4_decompress_safe");
        a.compress_default = lib.symbol<decltype(a.compress_default)>("LZ4_compress_default");
        a.compress_bound = lib.symbol<decltype(a.compress_bound)>("LZ4_compressBound");
        a.create_dctx = lib.symbol<decltype(a.create_dctx)>("LZ4F_createDecompressionContext");
        a.free_dctx = lib.symbol<decltype(a.free_dctx)>("LZ4F_freeDecompressionContext");
        a.frame_decompress = lib.symbol<decltype(a.frame_decompress)>("LZ4F_decompress");
        a.is_error = lib.symbol<decltype(a.is_error)>("LZ4F_isError");
        return a;
    }();
    return api;
}

// ---------------------------------------------------------------------------

bool starts_with(ByteView d, std::initializer_list<std::uint8_t> magic) {
    if (d.size() < magic.size()) return false;
    return std::equal(magic.begin(), magic.end(), d.begin());
}

bool valid_lzma_dict(std::uint32_t d) {
    if (d < (1u << 12) || d > (1u << 30)) return false;
    for (unsigned n = 12; n <= 30; ++n) {
        std::uint32_t p = 1u << n;
        if (d == p || d == p + (p >> 1)) return true;
    }
    return false;
}

// Appends to `out` until `max_output` is reached; returns false when cut.
bool append_capped(Bytes& out, const std::uint8_t* data, std::size_t n, std::size_t max_output) {
    std::size_t room = max_output - std::min(max_output, out.size());
    out.insert(out.end(), data, data + std::min(n, room));
    return n <= room;
}

Decoded decode_gzip(ByteView in, std::size_t max_output) {
    Decoded r;
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        r.error = "inflateInit2 failed";
        return r;
    }
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(std::min<std::size_t>(in.size(), UINT32_MAX));
    std::uint8_t buf[kChunk];
    int rc = Z_OK;
    while (true) {
        zs.next_out = buf;
        zs.avail_out = sizeof buf;
        rc = inflate(&zs, Z_NO_FLUSH);
        std::size_t got = sizeof buf - zs.avail_out;
        if (!append_capped(r.data, buf, got, max_output)) {
            r.error = "decompressed size limit exceeded";
            break;
        }
        if (rc == Z_STREAM_END) {
            r.complete = true;
            break;
        }
        if (rc == Z_BUF_ERROR && zs.avail_in == 0) {
            r.error = "gzip stream truncated";
            break;
        }
        if (rc != Z_OK && rc != Z_BUF_ERROR) {
            r.error = std::string("gzip: ") + (zs.msg ? zs.msg : "data error");
            break;
        }
        if (zs.avail_in == 0 && got == 0) {
            r.error = "gzip stream truncated";
            break;
        }
    }
    inflateEnd(&zs);
    return r;
}

Decoded decode_liblzma(ByteView in, std::size_t max_output, bool alone) {
    Decoded r;
    lzma_stream ls = LZMA_STREAM_INIT;
    lzma_ret rc = alone ? lzma_alone_decoder(&ls, UINT64_MAX) : lzma_stream_decoder(&ls, UINT64_MAX, 0);
    if (rc != LZMA_OK) {
        r.error = "lzma decoder init failed";
        return r;
    }
    ls.next_in = in.data();
    ls.avail_in = in.size();
    std::uint8_t buf[kChunk];
    while (true) {
        ls.next_out = buf;
        ls.avail_out = sizeof buf;
        rc = lzma_code(&ls, LZMA_FINISH);
        std::size_t got = sizeof buf - ls.avail_out;
        if (!append_capped(r.data, buf, got, max_output)) {
            r.error = "decompressed size limit exceeded";
            break;
        }
        if (rc == LZMA_STREAM_END) {
            r.complete = true;
            break;
        }
        if (rc != LZMA_OK) {
            r.error = rc == LZMA_BUF_ERROR ? "stream truncated" : "corrupt stream (liblzma code " + std::to_string(rc) + ")";
            break;
        }
    }
    lzma_end(&ls);
    return r;
}

Decoded decode_bzip2(ByteView in, std::size_t max_output) {
    Decoded r;
    const auto& api = bz2();
    if (!api.ok()) {
        r.error = "bzip2 codec unavailable";
        return r;
    }
    BzStream bs{};
    if (api.decompress_init(&bs, 0, 0) != kBzOk) {
        r.error = "BZ2_bzDecompressInit failed";
        return r;
    }
    std::size_t offset = 0;
    std::uint8_t buf[kChunk];
    while (true) {
        if (bs.avail_in == 0 && offset < in.size()) {
            std::size_t n = std::min<std::size_t>(in.size() - offset, 1u << 30);
            bs.next_in = const_cast<char*>(reinterpret_cast<const char*>(in.data() + offset));
            bs.avail_in = static_cast<unsigned>(n);
            offset += n;
        }
        bs.next_out = reinterpret_cast<char*>(buf);
        bs.avail_out = sizeof buf;
        int rc = api.decompress(&bs);
        std::size_t got = sizeof buf - bs.avail_out;
        if (!append_capped(r.data, buf, got, max_output)) {
            r.error = "decompressed size limit exceeded";
            break;
        }
        if (rc == kBzStreamEnd) {
            r.complete = true;
            break;
        }
        if (rc != kBzOk) {
            r.error = "bzip2: corrupt stream (code " + std::to_string(rc) + ")";
            break;
        }
        if (bs.avail_in == 0 && offset >= in.size() && got == 0) {
            r.error = "bzip2 stream truncated";
            break;
        }
    }
    api.decompress_end(&bs);
    return r;
}

Decoded decode_zstd(ByteView in, std::size_t max_output) {
    Decoded r;
    const auto& api = zstd();
    if (!api.ok()) {
        r.error = "zstd codec unavailable";
        return r;
    }
    void* ds = api.create_dstream();
    api.init_dstream(ds);
    ZstdInBuffer ib{in.data(), in.size(), 0};
    std::uint8_t buf[kChunk];
    while (true) {
        ZstdOutBuffer ob{buf, sizeof buf, 0};
        std::size_t rc = api.decompress_stream(ds, &ob, &ib);
        if (api.is_error(rc)) {
            r.error = std::string("zstd: ") + api.error_name(rc);
            break;
        }
        if (!append_capped(r.data, buf, ob.pos, max_output)) {
            r.error = "decompressed size limit exceeded";
            break;
        }
        if (rc == 0) {
            r.complete = true;
            break;
        }
        if (ib.pos == ib.size && ob.pos < ob.size) {
            r.error = "zstd stream truncated";
            break;
        }
    }
    api.free_dstream(ds);
    return r;
}

constexpr std::uint32_t kLz4LegacyMagic = 0x184C2102;
constexpr std::size_t kLz4LegacyBlock = 8u << 20;

Decoded decode_lz4(ByteView in, std::size_t max_output) {
    Decoded r;
    const auto& api = lz4();
    if (!api.ok()) {
        r.error = "lz4 codec unavailable";
        return r;
    }
    if (in.size() >= 4 && load_u32(in, 0, false) == kLz4LegacyMagic) {
        std::size_t p = 4;
        std::vector<char> block(kLz4LegacyBlock);
        while (true) {
            if (p + 4 > in.size()) {
                r.complete = true;  // legacy frames have no end marker
                break;
            }
            std::uint32_t csize = load_u32(in, p, false);
            if (csize == kLz4LegacyMagic) {
                r.complete = true;
                break;
            }
            p += 4;
            if (csize > in.size() - p || csize > static_cast<std::uint32_t>(api.compress_bound(kLz4LegacyBlock))) {
                // The kernel appends the uncompressed size after the last block.
                r.complete = !r.data.empty();
                if (!r.complete) r.error = "lz4 block truncated";
                break;
            }
            int n = api.decompress_safe(reinterpret_cast<const char*>(in.data() + p), block.data(),
                                        static_cast<int>(csize), static_cast<int>(block.size()));
            if (n < 0) {
                r.error = "lz4: corrupt block";
                break;
            }
            if (!append_capped(r.data, reinterpret_cast<std::uint8_t*>(block.data()),
                               static_cast<std::size_t>(n), max_output)) {
                r.error = "decompressed size limit exceeded";
                break;
            }
            p += csize;
        }
        return r;
    }

    void* ctx = nullptr;
    if (api.is_error(api.create_dctx(&ctx, kLz4fVersion))) {
        r.error = "lz4 frame context failed";
        return r;
    }
    std::size_t p = 0;
    std::uint8_t buf[kChunk];
    while (true) {
        std::size_t dst = sizeof buf;
        std::size_t src = in.size() - p;
        std::size_t rc = api.frame_decompress(ctx, buf, &dst, in.data() + p, &src, nullptr);
        if (api.is_error(rc)) {
            r.error = "lz4: corrupt frame";
            break;
        }
        p += src;
        if (!append_capped(r.data, buf, dst, max_output)) {
            r.error = "decompressed size limit exceeded";
            break;
        }
        if (rc == 0) {
            r.complete = true;
            break;
        }
        if (p >= in.size() && dst == 0) {
            r.error = "lz4 frame truncated";
            break;
        }
    }
    api.free_dctx(ctx);
    return r;
}

Bytes encode_gzip(ByteView in) {
    z_stream zs{};
    if (deflateInit2(&zs, 9, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw Error("deflateInit2 failed");
    Bytes out(deflateBound(&zs, in.size()) + 32);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    out.resize(zs.total_out);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw Error("gzip encode failed");
    return out;
}

Bytes encode_liblzma(ByteView in, bool alone) {
    lzma_stream ls = LZMA_STREAM_INIT;
    lzma_ret rc;
    if (alone) {
        lzma_options_lzma opt;
        lzma_lzma_preset(&opt, 6);
        opt.dict_size = 1u << 23;
        rc = lzma_alone_encoder(&ls, &opt);
    } else {
        rc = lzma_easy_encoder(&ls, 6, LZMA_CHECK_CRC32);
    }
    if (rc != LZMA_OK) throw Error("lzma encoder init failed");
    Bytes out;
    ls.next_in = in.data();
    ls.avail_in = in.size();
    std::uint8_t buf[kChunk];
    do {
        ls.next_out = buf;
        ls.avail_out = sizeof buf;
        rc = lzma_code(&ls, LZMA_FINISH);
        out.insert(out.end(), buf, buf + (sizeof buf - ls.avail_out));
    } while (rc == LZMA_OK);
    lzma_end(&ls);
    if (rc != LZMA_STREAM_END) throw Error("lzma encode failed");
    return out;
}

}  // namespace

std::string_view to_string(Compression c) {
    switch (c) {
        case Compression::gzip: return "gzip";
        case Compression::xz: return "xz";
        case Compression::bzip2: return "bzip2";
        case Compression::lzma: return "lzma";
        case Compression::lz4: return "lz4";
        case Compression::zstd: return "zstd";
    }
    return "unknown";
}

bool has_signature(Compression c, ByteView d) {
    switch (c) {
        case Compression::gzip:
            return d.size() >= 10 && d[0] == 0x1f && d[1] == 0x8b && d[2] == 0x08 && (d[3] & 0xe0) == 0;
        case Compression::xz:
            return starts_with(d, {0xfd, '7', 'z', 'X', 'Z', 0x00});
        case Compression::bzip2:
            return d.size() >= 10 && d[0] == 'B' && d[1] == 'Z' && d[2] == 'h' && d[3] >= '1' &&
                   d[3] <= '9' && starts_with(d.subspan(4), {0x31, 0x41, 0x59, 0x26, 0x53, 0x59});
        case Compression::lzma: {
            if (d.size() < 13 || d[0] >= 225) return false;
            if (!valid_lzma_dict(load_u32(d, 1, false))) return false;
            std::uint64_t size = 0;
            for (int i = 7; i >= 0; --i) size = (size << 8) | d[5 + i];
            return size == UINT64_MAX || size < (std::uint64_t{1} << 34);
        }
        case Compression::lz4:
            return starts_with(d, {0x02, 0x21, 0x4c, 0x18}) || starts_with(d, {0x04, 0x22, 0x4d, 0x18});
        case Compression::zstd:
            return starts_with(d, {0x28, 0xb5, 0x2f, 0xfd});
    }
    return false;
}

std::optional<Compression> detect_compression(ByteView data) {
    for (auto c : kCompressionOrder)
        if (has_signature(c, data)) return c;
    return std::nullopt;
}

Decoded decompress(Compression c, ByteView input, std::size_t max_output) {
    switch (c) {
        case Compression::gzip: return decode_gzip(input, max_output);
        case Compression::xz: return decode_liblzma(input, max_output, false);
        case Compression::lzma: return decode_liblzma(input, max_output, true);
        case Compression::bzip2: return decode_bzip2(input, max_output);
        case Compression::lz4: return decode_lz4(input, max_output);
        case Compression::zstd: return decode_zstd(input, max_output);
    }
    return {};
}

bool codec_available(Compression c) {
    switch (c) {
        case Compression::bzip2: return bz2().ok();
        case Compression::lz4: return lz4().ok();
        case Compression::zstd: return zstd().ok();
        default: return true;
    }
}

Bytes compress(Compression c, ByteView input) {
    if (!codec_available(c)) throw Error(std::string(to_string(c)) + " codec unavailable");
    switch (c) {
        case Compression::gzip: return encode_gzip(input);
        case Compression::xz: return encode_liblzma(input, false);
        case Compression::lzma: return encode_liblzma(input, true);
        case Compression::bzip2: {
            unsigned cap = static_cast<unsigned>(input.size() + input.size() / 100 + 600);
            Bytes out(cap);
            int rc = bz2().buff_compress(reinterpret_cast<char*>(out.data()), &cap,
                                         const_cast<char*>(reinterpret_cast<const char*>(input.data())),
                                         static_cast<unsigned>(input.size()), 9, 0, 0);
            if (rc != kBzOk) throw Error("bzip2 encode failed");
            out.resize(cap);
            return out;
        }
        case Compression::zstd: {
            Bytes out(zstd().compress_bound(input.size()));
            std::size_t n = zstd().compress(out.data(), out.size(), input.data(), input.size(), 3);
            if (zstd().is_error(n)) throw Error("zstd encode failed");
            out.resize(n);
            return out;
        }
        case Compression::lz4: {
            const auto& api = lz4();
            Bytes out = {0x02, 0x21, 0x4c, 0x18};
            std::vector<char> block(static_cast<std::size_t>(api.compress_bound(kLz4LegacyBlock)));
            for (std::size_t p = 0; p < input.size(); p += kLz4LegacyBlock) {
                int len = static_cast<int>(std::min(kLz4LegacyBlock, input.size() - p));
                int n = api.compress_default(reinterpret_cast<const char*>(input.data() + p),
                                             block.data(), len, static_cast<int>(block.size()));
                if (n <= 0) throw Error("lz4 encode failed");
                for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
                out.insert(out.end(), block.begin(), block.begin() + n);
            }
            return out;
        }
    }
    return {};
}

std::vector<ContainerCandidate> find_containers(ByteView data, std::size_t limit) {
    std::vector<ContainerCandidate> out;
    for (std::size_t i = 0; i < data.size() && out.size() < limit; ++i) {
        std::optional<Compression> hit;
        ByteView at = data.subspan(i);
        switch (data[i]) {
            case 0x1f: if (has_signature(Compression::gzip, at)) hit = Compression::gzip; break;
            case 0xfd: if (has_signature(Compression::xz, at)) hit = Compression::xz; break;
            case 'B': if (has_signature(Compression::bzip2, at)) hit = Compression::bzip2; break;
            // Carving only considers the lc=3/lp=0/pb=2 properties byte every
            // kernel LZMA image uses; the generic check is too permissive on
            // arbitrary binary data.
            case 0x5d: if (has_signature(Compression::lzma, at)) hit = Compression::lzma; break;
            case 0x02:
            case 0x04: if (has_signature(Compression::lz4, at)) hit = Compression::lz4; break;
            case 0x28: if (has_signature(Compression::zstd, at)) hit = Compression::zstd; break;
            default: break;
        }
        if (hit) out.push_back({i, *hit});
    }
    return out;
}

}  // namespace kcve
