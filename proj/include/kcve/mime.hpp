#pragma once

#include "kcve/bytes.hpp"

#include <string>
#include <string_view>

namespace kcve {

namespace mime {
inline constexpr std::string_view kText = "text/plain";
inline constexpr std::string_view kShell = "text/x-shellscript";
inline constexpr std::string_view kOctet = "application/octet-stream";
inline constexpr std::string_view kEmpty = "application/x-empty";
inline constexpr std::string_view kElfExec = "application/x-executable";
inline constexpr std::string_view kElfShared = "application/x-sharedlib";
inline constexpr std::string_view kElfObject = "application/x-object";
inline constexpr std::string_view kElfCore = "application/x-coredump";
inline constexpr std::string_view kGzip = "application/gzip";
inline constexpr std::string_view kXz = "application/x-xz";
inline constexpr std::string_view kBzip2 = "application/x-bzip2";
inline constexpr std::string_view kLzma = "application/x-lzma";
inline constexpr std::string_view kLz4 = "application/x-lz4";
inline constexpr std::string_view kZstd = "application/zstd";
inline constexpr std::string_view kDeviceTree = "application/x-device-tree";
inline constexpr std::string_view kCpio = "application/x-cpio";
inline constexpr std::string_view kUImage = "application/x-uimage";
inline constexpr std::string_view kZImageArm = "application/x-linux-zimage-arm";
inline constexpr std::string_view kZImageArmBe = "application/x-linux-zimage-armbe";
inline constexpr std::string_view kImageArm64 = "application/x-linux-image-arm64";
inline constexpr std::string_view kBzImage = "application/x-linux-bzimage";
inline constexpr std::string_view kBflt = "application/x-bflt";
}  // namespace mime

/// Magic-number media type detection over the leading bytes of a file, with
/// a file-name extension fallback for content the signatures do not settle.
std::string sniff_mime(ByteView head, std::string_view filename = {});

/// True for "text/..." media types.
bool is_text_mime(std::string_view mime);

/// True for the compressed-stream media types produced by sniff_mime.
bool is_compressed_mime(std::string_view mime);

/// True for kernel image container formats (uImage, zImage, arm64 Image, bzImage).
bool is_kernel_image_mime(std::string_view mime);

}  // namespace kcve
