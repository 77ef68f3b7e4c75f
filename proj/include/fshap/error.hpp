#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fshap {

// Error with a short machine-parseable code. The CLI prints these as
// "error:<code>: <message>" on a single line and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

inline void require(bool condition, const char* code, const std::string& message) {
    if (!condition) throw Error(code, message);
}

}  // namespace fshap
