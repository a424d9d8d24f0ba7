#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kcve {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string_view as_chars(ByteView b) {
    return {reinterpret_cast<const char*>(b.data()), b.size()};
}

inline Bytes to_bytes(std::string_view s) {
    auto v = as_bytes(s);
    return {v.begin(), v.end()};
}

/// First occurrence of `needle` in `hay` at or after `from`.
std::optional<std::size_t> find_bytes(ByteView hay, ByteView needle, std::size_t from = 0);

inline std::optional<std::size_t> find_bytes(ByteView hay, std::string_view needle,
                                             std::size_t from = 0) {
    return find_bytes(hay, as_bytes(needle), from);
}

std::uint16_t load_u16(ByteView b, std::size_t off, bool big_endian);
std::uint32_t load_u32(ByteView b, std::size_t off, bool big_endian);

/// Whole-file read. Throws kcve::Error on I/O failure.
Bytes read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256.
std::string sha256_hex(ByteView data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace kcve
