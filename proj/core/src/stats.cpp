#include "qloss/stats.hpp"

#include <algorithm>
#include <cmath>

#include "qloss/error.hpp"

namespace qloss::stats {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DomainError("quantile of empty data");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxSummary box_summary(std::span<const double> values) {
    if (values.empty()) throw DomainError("box summary of empty data");
    std::vector<double> v(values.begin(), values.end());
    for (double x : v) {
        if (!std::isfinite(x)) throw DomainError("box summary input must be finite");
    }
    std::sort(v.begin(), v.end());

    BoxSummary b;
    b.n = v.size();
    b.median = quantile_sorted(v, 0.5);
    b.q1 = quantile_sorted(v, 0.25);
    b.q3 = quantile_sorted(v, 0.75);
    b.iqr = b.q3 - b.q1;
    b.lower_fence = b.q1 - kFenceFactor * b.iqr;
    b.upper_fence = b.q3 + kFenceFactor * b.iqr;

    bool any_inside = false;
    for (double x : v) {
        if (x < b.lower_fence || x > b.upper_fence) {
            b.outliers.push_back(x);
        } else {
            if (!any_inside) b.whisker_low = x;
            b.whisker_high = x;
            any_inside = true;
        }
    }
    return b;
}

namespace {

template <typename K, typename F>
std::map<K, BoxSummary> summarise_by(std::span<const Sample> samples, F key_of) {
    std::map<K, std::vector<double>> groups;
    for (const auto& s : samples) groups[key_of(s.key)].push_back(s.value);
    std::map<K, BoxSummary> out;
    for (const auto& [k, values] : groups) out.emplace(k, box_summary(values));
    return out;
}

}  // namespace

Grouping group_by_process(std::span<const Sample> samples) {
    Grouping g;
    g.by_key = summarise_by<ProcessKey>(samples, [](const ProcessKey& k) { return k; });
    g.by_depo = summarise_by<Depo>(samples, [](const ProcessKey& k) { return k.depo; });
    g.by_etch = summarise_by<Etch>(samples, [](const ProcessKey& k) { return k.etch; });
    g.by_strip = summarise_by<Strip>(samples, [](const ProcessKey& k) { return k.strip; });
    return g;
}

MedianComparison compare_medians(const BoxSummary& a, const BoxSummary& b) {
    if (a.n == 0 || b.n == 0) throw DomainError("median comparison needs non-empty summaries");
    if (b.median == 0.0) throw DomainError("median comparison: second median is zero");
    return {a.median / b.median, a.median < b.median};
}

}  // namespace qloss::stats
