#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kcve {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed textual input (version strings, table lines, CLI values).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Embedded configuration found but its payload cannot be recovered.
class ExtractionError : public Error {
public:
    ExtractionError(std::size_t offset, const std::string& what)
        : Error(what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Input document does not follow the expected schema. `path` is a
/// JSONPath-like pointer to the offending node.
class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class UnsupportedVersion : public Error {
public:
    using Error::Error;
};

class FetchError : public Error {
public:
    FetchError(const std::string& what, bool retryable)
        : Error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

/// A cached tarball no longer hashes to the checksum recorded when it was
/// first downloaded.
class CachePoisoned : public Error {
public:
    using Error::Error;
};

/// A cached artifact (tarball, extracted tree) is unusable. `entry` names it.
class CorruptCacheEntry : public Error {
public:
    CorruptCacheEntry(std::string entry, const std::string& what)
        : Error(entry + ": " + what), entry_(std::move(entry)) {}
    const std::string& entry() const noexcept { return entry_; }

private:
    std::string entry_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A required external tool (make, tar, host compiler) is absent. This is an
/// environment problem, not a property of the analysed firmware.
class ToolMissing : public Error {
public:
    using Error::Error;
};

class BuildFailed : public Error {
public:
    BuildFailed(const std::string& what, int exit_code, std::vector<std::string> tail)
        : Error(what), exit_code_(exit_code), tail_(std::move(tail)) {}
    int exit_code() const noexcept { return exit_code_; }
    const std::vector<std::string>& log_tail() const noexcept { return tail_; }

private:
    int exit_code_;
    std::vector<std::string> tail_;
};

}  // namespace kcve
