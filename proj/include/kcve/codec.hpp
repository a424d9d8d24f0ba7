#pragma once

#include "kcve/bytes.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kcve {

enum class Compression { gzip, xz, bzip2, lzma, lz4, zstd };

/// Order in which embedded payload formats are tried.
inline constexpr std::array kCompressionOrder = {
    Compression::gzip, Compression::xz,  Compression::bzip2,
    Compression::lzma, Compression::lz4, Compression::zstd,
};

inline constexpr std::size_t kDefaultMaxDecompressed = std::size_t{256} << 20;

std::string_view to_string(Compression c);

/// Does a stream of format `c` plausibly start at the beginning of `data`?
bool has_signature(Compression c, ByteView data);

/// Format whose signature matches the start of `data`, tried in
/// kCompressionOrder.
std::optional<Compression> detect_compression(ByteView data);

struct Decoded {
    Bytes data;
    bool complete = false;   // stream end reached without error
    std::string error;       // set when !complete
};

/// Decodes a single stream of format `c` from the start of `input`. Trailing
/// bytes after the stream end are ignored. On corruption or truncation the
/// bytes produced so far are returned with complete == false. Output beyond
/// `max_output` is cut and reported as an error.
Decoded decompress(Compression c, ByteView input,
                   std::size_t max_output = kDefaultMaxDecompressed);

/// Whether the decoder (and encoder) for `c` is usable in this process.
/// bzip2, lz4 and zstd are resolved from their shared libraries at runtime.
bool codec_available(Compression c);

/// Encodes `input`; used to build fixtures. lz4 produces the legacy
/// (kernel) framing. Throws kcve::Error when the codec is unavailable.
Bytes compress(Compression c, ByteView input);

struct ContainerCandidate {
    std::size_t offset;
    Compression format;
};

/// Offsets of compressed-stream signatures inside `data`, in ascending
/// offset order, at most `limit` of them.
std::vector<ContainerCandidate> find_containers(ByteView data, std::size_t limit = 64);

}  // namespace kcve
