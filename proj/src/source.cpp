#include "kcve/source.hpp"
#include "kcve/bytes.hpp"
#include "kcve/errors.hpp"
#include "kcve/process.hpp"

#include <curl/curl.h>
#include <fmt/format.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fcntl.h>
#include <mutex>
#include <sstream>
#include <sys/file.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace kcve {

namespace {

constexpr std::string_view kCdn = "https://cdn.kernel.org/pub/linux/kernel";
constexpr std::string_view kMarker = ".kcve-source";

std::string tail_lines(const std::string& text, std::size_t n) {
    std::size_t pos = text.size();
    for (std::size_t i = 0; i < n && pos > 0; ++i) {
        pos = text.rfind('\n', pos - 1);
        if (pos == std::string::npos) return text;
    }
    return text.substr(pos + 1);
}

struct Marker {
    std::string sha256;
    std::string url;
};

std::optional<Marker> read_marker(const fs::path& tree) {
    std::error_code ec;
    if (!fs::is_regular_file(tree / kMarker, ec)) return std::nullopt;
    std::istringstream in(read_text_file(tree / kMarker));
    Marker m;
    std::getline(in, m.sha256);
    std::getline(in, m.url);
    if (m.sha256.size() != 64) return std::nullopt;
    return m;
}

void curl_init_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

std::size_t write_to_file(char* data, std::size_t size, std::size_t n, void* user) {
    return std::fwrite(data, size, n, static_cast<std::FILE*>(user)) * size;
}

}  // namespace

std::string mainline_key(const KernelVersion& v) { return v.numeric(); }

std::string kernel_source_url(const KernelVersion& v) {
    if (v.major < 2 || (v.major == 2 && v.minor > 6))
        throw UnsupportedVersion(fmt::format("no kernel.org source layout for {}", v.numeric()));
    if (v.major == 2) return fmt::format("{}/v2.{}/linux-{}.tar.xz", kCdn, v.minor, v.numeric());
    std::string name = v.patch == 0 ? fmt::format("{}.{}", v.major, v.minor) : v.numeric();
    return fmt::format("{}/v{}.x/linux-{}.tar.xz", kCdn, v.major, name);
}

std::optional<KernelVersion> read_makefile_version(const fs::path& root) {
    std::error_code ec;
    if (!fs::is_regular_file(root / "Makefile", ec)) return std::nullopt;
    std::istringstream in(read_text_file(root / "Makefile"));
    std::optional<unsigned> fields[3];
    constexpr std::string_view kNames[3] = {"VERSION", "PATCHLEVEL", "SUBLEVEL"};
    std::string line;
    for (int n = 0; n < 40 && std::getline(in, line); ++n) {
        for (int i = 0; i < 3; ++i) {
            std::string_view l = line;
            if (!l.starts_with(kNames[i])) continue;
            l.remove_prefix(kNames[i].size());
            while (!l.empty() && (l.front() == ' ' || l.front() == '\t')) l.remove_prefix(1);
            if (!l.starts_with('=')) continue;
            l.remove_prefix(1);
            while (!l.empty() && (l.front() == ' ' || l.front() == '\t')) l.remove_prefix(1);
            unsigned value = 0;
            bool digits = false;
            for (char c : l) {
                if (c < '0' || c > '9') break;
                value = value * 10 + static_cast<unsigned>(c - '0');
                digits = true;
            }
            // an empty SUBLEVEL means 0 on some early releases
            if (digits || i == 2) fields[i] = value;
        }
    }
    if (!fields[0] || !fields[1]) return std::nullopt;
    return KernelVersion{*fields[0], *fields[1], fields[2].value_or(0), {}};
}

void CurlTransport::download(const std::string& url, const fs::path& dest) {
    curl_init_once();
    std::FILE* out = std::fopen(dest.c_str(), "wb");
    if (!out) throw FetchError(fmt::format("cannot write {}: {}", dest.string(), std::strerror(errno)), false);
    CURL* h = curl_easy_init();
    if (!h) {
        std::fclose(out);
        throw FetchError("curl_easy_init failed", true);
    }
    char err[CURL_ERROR_SIZE] = {};
    curl_easy_setopt(h, CURLOPT_URL, url.c_str());
    curl_easy_setopt(h, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(h, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(h, CURLOPT_CONNECTTIMEOUT, 30L);
    curl_easy_setopt(h, CURLOPT_TIMEOUT, timeout_);
    curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, &write_to_file);
    curl_easy_setopt(h, CURLOPT_WRITEDATA, out);
    curl_easy_setopt(h, CURLOPT_ERRORBUFFER, err);
    curl_easy_setopt(h, CURLOPT_USERAGENT, "kcve/" KCVE_VERSION);
    CURLcode rc = curl_easy_perform(h);
    long status = 0;
    curl_easy_getinfo(h, CURLINFO_RESPONSE_CODE, &status);
    curl_easy_cleanup(h);
    bool write_failed = std::fclose(out) != 0;
    if (rc != CURLE_OK) {
        bool retryable = rc != CURLE_HTTP_RETURNED_ERROR || status >= 500 || status == 429;
        throw FetchError(fmt::format("download of {} failed: {}{}", url, err[0] ? err : curl_easy_strerror(rc),
                                     status ? fmt::format(" (HTTP {})", status) : ""),
                         retryable);
    }
    if (write_failed) throw FetchError(fmt::format("cannot write {}", dest.string()), false);
}

void OfflineTransport::download(const std::string& url, const fs::path&) {
    throw FetchError(fmt::format("offline mode: {} is not cached", url), false);
}

FileLock::FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(fmt::format("cannot open lock {}: {}", path.string(), std::strerror(errno)));
    while (::flock(fd_, LOCK_EX) != 0) {
        if (errno == EINTR) continue;
        int e = errno;
        ::close(fd_);
        throw Error(fmt::format("cannot lock {}: {}", path.string(), std::strerror(e)));
    }
}

FileLock::~FileLock() {
    if (fd_ >= 0) ::close(fd_);
}

fs::path tree_lock_path(const fs::path& cache_dir, const KernelVersion& v) {
    return cache_dir / "locks" / (mainline_key(v) + ".tree.lock");
}

SourceTree fetch_kernel_source(const KernelVersion& v, const fs::path& cache_dir, Transport& transport,
                               const FetchOptions& options) {
    SourceTree st;
    st.version = KernelVersion{v.major, v.minor, v.patch, {}};
    st.url = kernel_source_url(v);
    const std::string key = mainline_key(v);

    fs::create_directories(cache_dir / "tarballs");
    fs::create_directories(cache_dir / "trees");
    fs::create_directories(cache_dir / "locks");
    FileLock lock(cache_dir / "locks" / (key + ".fetch.lock"));

    const fs::path tarball = cache_dir / "tarballs" / (key + ".tar.xz");
    const fs::path sha_file = fs::path(tarball.string() + ".sha256");
    const fs::path tree = cache_dir / "trees" / key;
    st.root = tree;

    std::optional<std::string> recorded;
    if (fs::exists(sha_file)) {
        std::string s = read_text_file(sha_file);
        recorded = s.substr(0, s.find_first_of(" \n"));
    }

    if (!fs::exists(tarball)) {
        // A finished tree outlives a pruned tarball.
        if (auto m = read_marker(tree); m && (!recorded || *recorded == m->sha256)) {
            st.sha256 = m->sha256;
            return st;
        }
        const fs::path part = fs::path(tarball.string() + ".part");
        for (unsigned attempt = 1;; ++attempt) {
            try {
                transport.download(st.url, part);
                break;
            } catch (const FetchError& e) {
                std::error_code ec;
                fs::remove(part, ec);
                if (!e.retryable() || attempt >= options.attempts) throw;
            }
        }
        fs::rename(part, tarball);
    }

    st.sha256 = sha256_file(tarball);
    if (recorded && *recorded != st.sha256)
        throw CachePoisoned(fmt::format("{}: SHA-256 {} differs from recorded {}", tarball.string(), st.sha256,
                                        *recorded));
    if (!recorded) write_file(sha_file, st.sha256 + "  " + tarball.filename().string() + "\n");

    if (auto m = read_marker(tree); m && m->sha256 == st.sha256) return st;

    const fs::path staging = cache_dir / "trees" / (key + ".partial");
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::remove_all(tree, ec);
    fs::create_directories(staging);
    ProcessResult r = run_process({{"tar", "-xJf", tarball.string(), "-C", staging.string(), "--strip-components=1",
                                    "--no-same-owner"},
                                   {},
                                   {},
                                   {}});
    if (r.exit_code != 0) {
        fs::remove_all(staging, ec);
        throw CorruptCacheEntry(tarball.string(),
                                fmt::format("extraction failed (tar exit {}): {}", r.exit_code, tail_lines(r.output, 5)));
    }
    auto found = read_makefile_version(staging);
    if (!found || *found != st.version) {
        fs::remove_all(staging, ec);
        throw CorruptCacheEntry(tarball.string(),
                                fmt::format("extracted Makefile reports {}, expected {}",
                                            found ? found->numeric() : std::string("no version"), key));
    }
    write_file(staging / kMarker, st.sha256 + "\n" + st.url + "\n");
    fs::rename(staging, tree);
    return st;
}

}  // namespace kcve
