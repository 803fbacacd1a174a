#pragma once

#include <stdexcept>
#include <string>

namespace syncrec {

/// Exception carrying a short machine-readable code (e.g. "bad-type",
/// "undeclared-stream") next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message.empty() ? code : code + ": " + message), code_(std::move(code)) {}

    explicit Error(std::string code) : Error(std::move(code), {}) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

} // namespace syncrec
