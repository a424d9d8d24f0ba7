#pragma once

#include "kcve/bytes.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

namespace testing {

inline std::filesystem::path fixture(std::string_view rel) {
    return std::filesystem::path(KCVE_FIXTURE_DIR) / rel;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> n{0};
        path_ = std::filesystem::temp_directory_path() /
                ("kcve-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// Seed from KCVE_TEST_SEED when set, so a failing property run can be replayed.
inline std::uint64_t test_seed(std::uint64_t fallback) {
    if (const char* s = std::getenv("KCVE_TEST_SEED"); s && *s) return std::strtoull(s, nullptr, 0);
    return fallback;
}

inline kcve::Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    kcve::Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

inline void append(kcve::Bytes& out, kcve::ByteView tail) { out.insert(out.end(), tail.begin(), tail.end()); }
inline void append(kcve::Bytes& out, std::string_view tail) { append(out, kcve::as_bytes(tail)); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Minimal flattened device tree writer (version 17, big-endian).
class FdtBuilder {
public:
    void begin(std::string_view name) {
        u32(1);
        bytes(name);
        struct_.push_back(0);
        pad();
    }
    void end() { u32(2); }
    void prop(std::string_view name, std::string_view value) {
        u32(3);
        u32(static_cast<std::uint32_t>(value.size()));
        u32(string_offset(name));
        bytes(value);
        pad();
    }
    // NUL-separated string list, as "compatible" is encoded.
    void compatible(const std::vector<std::string>& values) {
        std::string v;
        for (const auto& s : values) v += s + '\0';
        prop("compatible", v);
    }
    kcve::Bytes finish() {
        u32(9);
        const std::uint32_t header = 40, rsvmap = 16;
        std::uint32_t off_struct = header + rsvmap;
        std::uint32_t off_strings = off_struct + static_cast<std::uint32_t>(struct_.size());
        std::uint32_t total = off_strings + static_cast<std::uint32_t>(strings_.size());
        kcve::Bytes out;
        auto put = [&](std::uint32_t v) {
            for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
        };
        put(0xd00dfeed);
        put(total);
        put(off_struct);
        put(off_strings);
        put(header);  // off_mem_rsvmap
        put(17);
        put(16);
        put(0);  // boot_cpuid_phys
        put(static_cast<std::uint32_t>(strings_.size()));
        put(static_cast<std::uint32_t>(struct_.size()));
        out.resize(out.size() + rsvmap, 0);
        append(out, struct_);
        append(out, kcve::as_bytes(strings_));
        return out;
    }

private:
    void u32(std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) struct_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void bytes(std::string_view s) { struct_.insert(struct_.end(), s.begin(), s.end()); }
    void pad() {
        while (struct_.size() % 4) struct_.push_back(0);
    }
    std::uint32_t string_offset(std::string_view name) {
        std::string key(name);
        key.push_back('\0');
        auto pos = strings_.find(key);
        if (pos != std::string::npos && (pos == 0 || strings_[pos - 1] == '\0')) return static_cast<std::uint32_t>(pos);
        auto off = static_cast<std::uint32_t>(strings_.size());
        strings_ += key;
        return off;
    }

    kcve::Bytes struct_;
    std::string strings_;
};

// Device tree with one cpu node per compatible list under /cpus.
inline kcve::Bytes cpu_tree(const std::vector<std::vector<std::string>>& cpus, std::string_view model = "test board") {
    FdtBuilder b;
    b.begin("");
    b.prop("model", std::string(model) + '\0');
    b.compatible({"vendor,board"});
    b.begin("cpus");
    for (std::size_t i = 0; i < cpus.size(); ++i) {
        b.begin("cpu@" + std::to_string(i));
        b.prop("device_type", std::string("cpu") + '\0');
        b.compatible(cpus[i]);
        b.end();
    }
    b.end();
    b.begin("memory@0");
    b.compatible({"not,a-cpu"});
    b.end();
    b.end();
    return b.finish();
}

}  // namespace testing
