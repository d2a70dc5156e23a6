#include "qloss/error.hpp"

#include <utility>

namespace qloss {

namespace {

std::string format_parse_message(const std::string& path, std::size_t line, const std::string& what) {
    std::string msg = path;
    if (line > 0) {
        msg += ":" + std::to_string(line);
    }
    msg += ": " + what;
    return msg;
}

}  // namespace

ParseError::ParseError(std::string path, std::size_t line, const std::string& what)
    : Error(format_parse_message(path, line, what)), path_(std::move(path)), line_(line) {}

}  // namespace qloss
