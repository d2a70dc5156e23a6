#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qloss/report.hpp"

namespace qloss::app {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

// Options shared by every subcommand; settable from flags or the config file.
struct GlobalOptions {
    std::filesystem::path out = "qloss-out";
    std::uint64_t seed = kDefaultSeed;
    unsigned jobs = 1;
    std::optional<double> attenuation_db;
    std::optional<double> trench_nm;
    std::string windows;
};

struct Context {
    GlobalOptions global;
    std::ostream& out;
    std::ostream& err;
};

// Exit codes: everything fine, hard failure, some batch items failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

// Expands directories (recursively, files with `extension`) and keeps plain
// files as given. The result is sorted and free of duplicates.
std::vector<std::filesystem::path> collect_files(const std::vector<std::string>& inputs, const std::string& extension);

// Parses "lo:hi,lo:hi" into pairs; throws DomainError.
std::vector<std::pair<double, double>> parse_interval_list(const std::string& text);

// Records `message` for `item` in a diagnostics array and on stderr.
void add_diagnostic(Context& ctx, report::Json& diagnostics, const std::string& item, const std::string& message);

std::string file_stem_token(const std::filesystem::path& p);

}  // namespace qloss::app
