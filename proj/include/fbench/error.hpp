#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fbench {

// All recoverable failures carry a short machine-checkable code
// ("InvalidLabel", "MissingDataset", ...) plus a human message.
class BenchError : public std::runtime_error {
public:
    BenchError(std::string code, std::string message)
        : std::runtime_error(code + ": " + message),
          code_(std::move(code)),
          message_(std::move(message)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string code_;
    std::string message_;
};

// Failures raised while evaluating predictions; the CLI maps these to a
// distinct exit code so scripts can tell config mistakes from bad runs.
class EvalError : public BenchError {
public:
    using BenchError::BenchError;
};

}  // namespace fbench
