#include "kcve/process.hpp"
#include "kcve/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <map>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

namespace kcve {

namespace {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

void make_pipe(Fd& r, Fd& w) {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(fmt::format("pipe: {}", std::strerror(errno)));
    r.fd = fds[0];
    w.fd = fds[1];
}

std::vector<std::string> merged_environment(const std::vector<std::pair<std::string, std::string>>& extra) {
    std::map<std::string, std::string> env;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv = *e;
        auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        env[std::string(kv.substr(0, eq))] = std::string(kv.substr(eq + 1));
    }
    for (const auto& [k, v] : extra) env[k] = v;
    std::vector<std::string> out;
    for (const auto& [k, v] : env) out.push_back(k + "=" + v);
    return out;
}

}  // namespace

std::optional<std::filesystem::path> find_program(const std::string& name) {
    if (name.find('/') != std::string::npos) {
        if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
        return std::nullopt;
    }
    const char* path = std::getenv("PATH");
    std::string_view dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
    while (true) {
        auto colon = dirs.find(':');
        std::string dir(dirs.substr(0, colon));
        if (dir.empty()) dir = ".";
        std::filesystem::path candidate = std::filesystem::path(dir) / name;
        if (::access(candidate.c_str(), X_OK) == 0 && !std::filesystem::is_directory(candidate)) return candidate;
        if (colon == std::string_view::npos) break;
        dirs.remove_prefix(colon + 1);
    }
    return std::nullopt;
}

ProcessResult run_process(const ProcessSpec& spec) {
    if (spec.argv.empty()) throw PreconditionError("run_process: empty argv");
    auto exe = find_program(spec.argv[0]);
    if (!exe) throw ToolMissing(fmt::format("required tool '{}' not found on PATH", spec.argv[0]));

    // Everything the child needs is built before fork.
    std::vector<std::string> env = merged_environment(spec.env);
    std::vector<char*> envp, argv;
    for (auto& e : env) envp.push_back(e.data());
    envp.push_back(nullptr);
    std::vector<std::string> args = spec.argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    std::string exe_path = exe->string();
    std::string cwd = spec.cwd.string();

    Fd out_r, out_w, err_r, err_w;
    make_pipe(out_r, out_w);
    make_pipe(err_r, err_w);  // exec failure channel

    pid_t pid = ::fork();
    if (pid < 0) throw Error(fmt::format("fork: {}", std::strerror(errno)));
    if (pid == 0) {
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, 0);
        ::dup2(out_w.fd, 1);
        ::dup2(out_w.fd, 2);
        int err = 0;
        if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) err = errno;
        if (!err) {
            ::execve(exe_path.c_str(), argv.data(), envp.data());
            err = errno;
        }
        [[maybe_unused]] auto n = ::write(err_w.fd, &err, sizeof err);
        ::_exit(127);
    }
    out_w.reset();
    err_w.reset();

    ProcessResult result;
    auto deadline = spec.timeout ? std::chrono::steady_clock::now() + *spec.timeout
                                 : std::chrono::steady_clock::time_point::max();
    char buf[65536];
    for (;;) {
        int wait_ms = -1;
        if (spec.timeout) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) {
                ::kill(pid, SIGKILL);
                result.timed_out = true;
                break;
            }
            wait_ms = static_cast<int>(std::min<long long>(left.count(), 1000));
        }
        pollfd p{out_r.fd, POLLIN, 0};
        int rc = ::poll(&p, 1, wait_ms);
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) continue;
        ssize_t n = ::read(out_r.fd, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        result.output.append(buf, static_cast<std::size_t>(n));
    }

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    int child_err = 0;
    if (::read(err_r.fd, &child_err, sizeof child_err) == sizeof child_err && child_err != 0) {
        if (child_err == ENOENT || child_err == EACCES || child_err == ENOEXEC)
            throw ToolMissing(fmt::format("cannot execute '{}': {}", exe_path, std::strerror(child_err)));
        throw Error(fmt::format("cannot start '{}' in '{}': {}", exe_path, cwd, std::strerror(child_err)));
    }
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
    return result;
}

}  // namespace kcve
