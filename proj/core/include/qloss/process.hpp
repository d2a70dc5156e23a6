#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qloss {

enum class Depo { A, B, C };
enum class Etch { HP, LP };
enum class Strip { HT, LT };
enum class WetEtch { None, BOE, BOE_tc };

// Fabrication variation a resonator went through. Text form is
// "DEPO/ETCH/STRIP/WET", e.g. "A/LP/LT/none" or "B/HP/HT/BOE_tc".
struct ProcessKey {
    Depo depo = Depo::A;
    Etch etch = Etch::HP;
    Strip strip = Strip::HT;
    WetEtch wet_etch = WetEtch::None;

    auto operator<=>(const ProcessKey&) const = default;
};

std::string to_string(Depo d);
std::string to_string(Etch e);
std::string to_string(Strip s);
std::string to_string(WetEtch w);
std::string to_string(const ProcessKey& key);

std::optional<Depo> parse_depo(std::string_view s);

// Throws DomainError on malformed text.
ProcessKey parse_process_key(std::string_view text);

// Variations that were actually fabricated, including the B films before
// their BOE treatment (those chips were measured before and after).
const std::vector<ProcessKey>& known_process_keys();
bool is_known_process(const ProcessKey& key);

// Resonator count per variation as fabricated; nullopt for combinations
// without a tabulated count.
std::optional<int> tabulated_resonator_count(const ProcessKey& key);

}  // namespace qloss
