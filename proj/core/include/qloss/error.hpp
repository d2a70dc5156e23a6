#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qloss {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or invalid input file. `line` is 1-based, 0 when the problem is
// not tied to a single line (e.g. too few rows).
class ParseError : public Error {
public:
    ParseError(std::string path, std::size_t line, const std::string& what);

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string path_;
    std::size_t line_;
};

// A precondition on numeric input was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

// A fit could not produce a trustworthy result.
class FitError : public Error {
public:
    using Error::Error;
};

// A peak-fit window holds nothing above the noise.
class NoPeakError : public FitError {
public:
    using FitError::FitError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace qloss
