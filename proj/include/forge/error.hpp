#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Base for every error raised by the toolkit. The CLI maps each subclass to
// its own exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad parameter, inconsistent spec, non-ascending edges, missing grid cells.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Unreadable/unwritable path.
class IoError : public Error {
public:
    using Error::Error;
};

// Malformed record in an input file.
class FormatError : public Error {
public:
    FormatError(const std::string &file, std::size_t line, const std::string &what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string &file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

} // namespace forge
