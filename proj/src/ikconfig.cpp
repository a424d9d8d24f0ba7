#include "kcve/errors.hpp"
#include "kcve/kconfig.hpp"
#include "kcve/mime.hpp"

#include <fmt/format.h>

namespace kcve {

namespace {

bool mentions_kernel(ByteView blob) {
    return find_bytes(blob, kIkconfigStart).has_value() || find_bytes(blob, "Linux version ").has_value();
}

// Decodes the bytes strictly between the markers. Returns nullopt (with a
// warning) when the payload is neither a recognised stream nor config text.
std::optional<IkconfigMatch> decode_payload(ByteView payload, std::size_t marker_offset,
                                            const IkconfigOptions& options, Diagnostics* diag) {
    IkconfigMatch m;
    m.marker_offset = marker_offset;
    std::string text;
    if (auto fmt_ = detect_compression(payload)) {
        Decoded d = decompress(*fmt_, payload, options.max_decompressed);
        if (!d.complete) {
            warn(diag, fmt::format("IKCONFIG payload at offset {}: {} stream unusable: {}", marker_offset,
                                   to_string(*fmt_), d.error));
            return std::nullopt;
        }
        m.payload_format = fmt_;
        text.assign(as_chars(d.data));
    } else {
        text.assign(as_chars(payload));
    }
    Diagnostics parse_diag;
    m.config = parse_config(text, &parse_diag);
    if (m.config.empty()) {
        warn(diag, fmt::format("IKCONFIG payload at offset {}: no configuration directives", marker_offset));
        return std::nullopt;
    }
    return m;
}

std::optional<IkconfigMatch> search_layer(ByteView data, unsigned depth, const IkconfigOptions& options,
                                          Diagnostics* diag) {
    std::size_t from = 0;
    while (auto start = find_bytes(data, kIkconfigStart, from)) {
        std::size_t payload_begin = *start + kIkconfigStart.size();
        auto end = find_bytes(data, kIkconfigEnd, payload_begin);
        if (!end) {
            std::string what = fmt::format("IKCONFIG payload at offset {} truncated: no {} marker follows",
                                           *start, kIkconfigEnd);
            if (depth == 0) throw ExtractionError(*start, what);
            warn(diag, what);
            break;
        }
        if (auto m = decode_payload(data.subspan(payload_begin, *end - payload_begin), *start, options, diag))
            return m;
        from = *end + kIkconfigEnd.size();
    }

    if (depth >= options.max_depth) return std::nullopt;

    for (const auto& cand : find_containers(data, options.max_candidates)) {
        Decoded d = decompress(cand.format, data.subspan(cand.offset), options.max_decompressed);
        if (!d.complete) {
            warn(diag, fmt::format("{} container at offset {}: {}", to_string(cand.format), cand.offset, d.error));
            if (d.data.empty()) continue;
        }
        if (auto m = search_layer(d.data, depth + 1, options, diag)) {
            if (depth == 0) {
                m->container_offset = cand.offset;
                m->container_format = cand.format;
            }
            return m;
        }
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(CandidateKind k) {
    switch (k) {
        case CandidateKind::plain_text: return "plain-text";
        case CandidateKind::kernel_binary: return "kernel-binary";
        case CandidateKind::other: return "other";
    }
    return "other";
}

CandidateKind classify_candidate(ByteView blob, std::string_view mime, std::string_view path_hint) {
    if (is_text_mime(mime)) return CandidateKind::plain_text;
    if (mime == mime::kElfObject) return CandidateKind::kernel_binary;
    if (is_kernel_image_mime(mime) || is_compressed_mime(mime)) return CandidateKind::kernel_binary;
    bool elf = mime == mime::kElfExec || mime == mime::kElfShared || mime == mime::kElfCore;
    if (elf && path_hint.ends_with(".ko")) return CandidateKind::kernel_binary;
    if ((elf || mime == mime::kOctet) && mentions_kernel(blob)) return CandidateKind::kernel_binary;
    return CandidateKind::other;
}

std::optional<IkconfigMatch> find_ikconfig(ByteView blob, const IkconfigOptions& options, Diagnostics* diag) {
    auto m = search_layer(blob, 0, options, diag);
    if (!m) return std::nullopt;
    m->config.source_kind = m->container_offset ? ConfigSource::embedded_container : ConfigSource::inline_string;
    return m;
}

}  // namespace kcve
