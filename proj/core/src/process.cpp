#include "qloss/process.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "qloss/error.hpp"

namespace qloss {

std::string to_string(Depo d) {
    switch (d) {
        case Depo::A: return "A";
        case Depo::B: return "B";
        case Depo::C: return "C";
    }
    return "?";
}

std::string to_string(Etch e) { return e == Etch::HP ? "HP" : "LP"; }

std::string to_string(Strip s) { return s == Strip::HT ? "HT" : "LT"; }

std::string to_string(WetEtch w) {
    switch (w) {
        case WetEtch::None: return "none";
        case WetEtch::BOE: return "BOE";
        case WetEtch::BOE_tc: return "BOE_tc";
    }
    return "?";
}

std::string to_string(const ProcessKey& key) {
    return to_string(key.depo) + "/" + to_string(key.etch) + "/" + to_string(key.strip) + "/" +
           to_string(key.wet_etch);
}

std::optional<Depo> parse_depo(std::string_view s) {
    if (s == "A") return Depo::A;
    if (s == "B") return Depo::B;
    if (s == "C") return Depo::C;
    return std::nullopt;
}

ProcessKey parse_process_key(std::string_view text) {
    std::array<std::string_view, 4> parts{};
    std::size_t start = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto slash = text.find('/', start);
        if (i + 1 < parts.size()) {
            if (slash == std::string_view::npos) {
                throw DomainError("process key '" + std::string(text) + "' needs 4 fields DEPO/ETCH/STRIP/WET");
            }
            parts[i] = text.substr(start, slash - start);
            start = slash + 1;
        } else {
            if (slash != std::string_view::npos) {
                throw DomainError("process key '" + std::string(text) + "' has more than 4 fields");
            }
            parts[i] = text.substr(start);
        }
    }

    ProcessKey key;
    const auto bad = [&](std::string_view field) {
        return DomainError("process key '" + std::string(text) + "': invalid " + std::string(field));
    };
    if (auto d = parse_depo(parts[0])) {
        key.depo = *d;
    } else {
        throw bad("deposition");
    }
    if (parts[1] == "HP") key.etch = Etch::HP;
    else if (parts[1] == "LP") key.etch = Etch::LP;
    else throw bad("etch");
    if (parts[2] == "HT") key.strip = Strip::HT;
    else if (parts[2] == "LT") key.strip = Strip::LT;
    else throw bad("strip");
    if (parts[3] == "none" || parts[3] == "-") key.wet_etch = WetEtch::None;
    else if (parts[3] == "BOE") key.wet_etch = WetEtch::BOE;
    else if (parts[3] == "BOE_tc") key.wet_etch = WetEtch::BOE_tc;
    else throw bad("wet etch");
    return key;
}

namespace {

struct Tabulated {
    ProcessKey key;
    std::optional<int> count;
};

const std::vector<Tabulated>& tabulated() {
    using D = Depo;
    using E = Etch;
    using S = Strip;
    using W = WetEtch;
    static const std::vector<Tabulated> rows = {
        {{D::A, E::HP, S::HT, W::None}, 17},
        {{D::A, E::HP, S::LT, W::None}, 18},
        {{D::A, E::LP, S::HT, W::None}, 18},
        {{D::A, E::LP, S::LT, W::None}, 17},
        // The HP/HT mixed film count covers both BOE and BOE_tc chips.
        {{D::B, E::HP, S::HT, W::BOE}, 16},
        {{D::B, E::HP, S::HT, W::BOE_tc}, std::nullopt},
        {{D::B, E::LP, S::LT, W::BOE}, 54},
        {{D::B, E::HP, S::HT, W::None}, std::nullopt},
        {{D::B, E::LP, S::LT, W::None}, std::nullopt},
        {{D::C, E::HP, S::HT, W::None}, 15},
        {{D::C, E::HP, S::LT, W::None}, 18},
        {{D::C, E::LP, S::HT, W::None}, 9},
        {{D::C, E::LP, S::LT, W::None}, 18},
    };
    return rows;
}

}  // namespace

const std::vector<ProcessKey>& known_process_keys() {
    static const std::vector<ProcessKey> keys = [] {
        std::vector<ProcessKey> out;
        for (const auto& row : tabulated()) out.push_back(row.key);
        return out;
    }();
    return keys;
}

bool is_known_process(const ProcessKey& key) {
    const auto& keys = known_process_keys();
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::optional<int> tabulated_resonator_count(const ProcessKey& key) {
    for (const auto& row : tabulated()) {
        if (row.key == key) return row.count;
    }
    return std::nullopt;
}

}  // namespace qloss
