#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kcve {

// Non-fatal findings collected while an operation runs. Not thread-safe; give
// each worker its own instance and merge afterwards.
class Diagnostics {
public:
    void warn(std::string message) { warnings_.push_back(std::move(message)); }

    void merge(const Diagnostics& other) {
        warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
    }

    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    bool empty() const noexcept { return warnings_.empty(); }

private:
    std::vector<std::string> warnings_;
};

inline void warn(Diagnostics* diag, std::string message) {
    if (diag) diag->warn(std::move(message));
}

}  // namespace kcve
