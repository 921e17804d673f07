#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace phenoscreen {

// All library failures are reported as Error. `code` is a stable
// machine-readable tag (e.g. "schema_mismatch", "io"); `what()` carries the
// human-readable detail including row/line indices where applicable.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
    throw Error(std::move(code), message);
}

}  // namespace phenoscreen
