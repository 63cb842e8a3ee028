#pragma once

#include <stdexcept>
#include <string>

namespace rfmodel {

/// Broad failure classes. The CLI maps each to a distinct exit code.
enum class ErrorCode {
    invalid_argument,  // precondition violated by the caller
    config,
    io,
    parse,
    divergence,
    metrology,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised by file readers; carries the 1-based line that failed.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& msg)
        : Error(ErrorCode::parse, source + ":" + std::to_string(line) + ": " + msg), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(ErrorCode::invalid_argument, msg); }

}  // namespace rfmodel
