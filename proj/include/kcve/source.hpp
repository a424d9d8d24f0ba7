#pragma once

#include "kcve/version.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace kcve {

/// kernel.org CDN tarball URL for the mainline release (suffix ignored).
/// Throws UnsupportedVersion below the v2.0 directory layout.
std::string kernel_source_url(const KernelVersion& v);

/// "X.Y.Z" key used for cache entries.
std::string mainline_key(const KernelVersion& v);

struct SourceTree {
    KernelVersion version;
    std::filesystem::path root;
    std::string url;
    std::string sha256;  // of the tarball the tree was extracted from
};

/// VERSION / PATCHLEVEL / SUBLEVEL of a tree's top-level Makefile.
std::optional<KernelVersion> read_makefile_version(const std::filesystem::path& root);

class Transport {
public:
    virtual ~Transport() = default;
    /// Stores the resource at `url` in `dest`. Throws FetchError.
    virtual void download(const std::string& url, const std::filesystem::path& dest) = 0;
};

/// libcurl-backed HTTPS transport.
class CurlTransport : public Transport {
public:
    explicit CurlTransport(long timeout_seconds = 1800) : timeout_(timeout_seconds) {}
    void download(const std::string& url, const std::filesystem::path& dest) override;

private:
    long timeout_;
};

/// Refuses every download; for --offline runs.
class OfflineTransport : public Transport {
public:
    void download(const std::string& url, const std::filesystem::path& dest) override;
};

/// Exclusive advisory lock on a file, held for the object's lifetime.
/// Serializes both threads and processes.
class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path);
    ~FileLock();
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

struct FetchOptions {
    unsigned attempts = 3;  // for retryable failures
};

/// Returns the extracted mainline tree for `v`, downloading into
/// `<cache>/tarballs/<X.Y.Z>.tar.xz` and extracting into
/// `<cache>/trees/<X.Y.Z>/` only when not already cached. The tarball's
/// SHA-256 is recorded next to it on first download; a later mismatch
/// throws CachePoisoned.
SourceTree fetch_kernel_source(const KernelVersion& v, const std::filesystem::path& cache_dir,
                               Transport& transport, const FetchOptions& options = {});

/// Lock path serializing work on the tree of `v`.
std::filesystem::path tree_lock_path(const std::filesystem::path& cache_dir, const KernelVersion& v);

}  // namespace kcve
