#include "kcve/bytes.hpp"
#include "kcve/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <memory>

namespace kcve {

std::optional<std::size_t> find_bytes(ByteView hay, ByteView needle, std::size_t from) {
    if (needle.empty()) return from <= hay.size() ? std::optional(from) : std::nullopt;
    if (from >= hay.size() || hay.size() - from < needle.size()) return std::nullopt;
    auto* p = static_cast<const std::uint8_t*>(
        memmem(hay.data() + from, hay.size() - from, needle.data(), needle.size()));
    if (!p) return std::nullopt;
    return static_cast<std::size_t>(p - hay.data());
}

std::uint16_t load_u16(ByteView b, std::size_t off, bool big_endian) {
    std::uint16_t lo = b[off], hi = b[off + 1];
    return big_endian ? static_cast<std::uint16_t>((lo << 8) | hi)
                      : static_cast<std::uint16_t>((hi << 8) | lo);
}

std::uint32_t load_u32(ByteView b, std::size_t off, bool big_endian) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        std::uint32_t byte = b[off + (big_endian ? i : 3 - i)];
        v = (v << 8) | byte;
    }
    return v;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    auto size = in.tellg();
    if (size < 0) throw Error("cannot size " + path.string());
    in.seekg(0);
    Bytes out(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(out.data()), size))
        throw Error("short read on " + path.string());
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    auto b = read_file(path);
    return std::string(as_chars(b));
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write on " + path.string());
}

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};
using MdCtx = std::unique_ptr<EVP_MD_CTX, MdCtxDeleter>;

std::string to_hex(const unsigned char* d, unsigned n) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(n * 2);
    for (unsigned i = 0; i < n; ++i) {
        s.push_back(digits[d[i] >> 4]);
        s.push_back(digits[d[i] & 0xf]);
    }
    return s;
}

}  // namespace

std::string sha256_hex(ByteView data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
        throw Error("sha256 failed");
    return to_hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    MdCtx ctx(EVP_MD_CTX_new());
    if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr)) throw Error("sha256 init failed");
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    return to_hex(md, len);
}

}  // namespace kcve
