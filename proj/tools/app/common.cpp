#include "common.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <sstream>

#include "qloss/error.hpp"

namespace qloss::app {

namespace fs = std::filesystem;

std::vector<fs::path> collect_files(const std::vector<std::string>& inputs, const std::string& extension) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == extension) out.push_back(e.path());
            }
        } else if (fs::is_regular_file(p, ec)) {
            out.push_back(p);
        } else {
            throw IoError(fmt::format("{}: no such file or directory", in));
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::pair<double, double>> parse_interval_list(const std::string& text) {
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw DomainError(fmt::format("interval '{}' is not lo:hi", item));
        try {
            const double lo = std::stod(item.substr(0, colon));
            const double hi = std::stod(item.substr(colon + 1));
            if (!(hi > lo)) throw DomainError(fmt::format("interval '{}' is empty", item));
            out.emplace_back(lo, hi);
        } catch (const std::logic_error&) {
            throw DomainError(fmt::format("interval '{}' is not numeric", item));
        }
    }
    if (out.empty()) throw DomainError("no intervals given");
    return out;
}

void add_diagnostic(Context& ctx, report::Json& diagnostics, const std::string& item, const std::string& message) {
    report::Json d = report::Json::object();
    d["item"] = item;
    d["message"] = message;
    diagnostics.push_back(std::move(d));
    ctx.err << item << ": " << message << "\n";
}

std::string file_stem_token(const fs::path& p) {
    std::string s = p.stem().string();
    for (char& c : s) {
        if (c == '/' || c == '\\' || c == ' ') c = '_';
    }
    return s;
}

}  // namespace qloss::app
