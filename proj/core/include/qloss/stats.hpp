#pragma once

// Box-plot statistics of loss metrics grouped by process variation.
//
// Quartiles interpolate linearly between order statistics at position
// p (n - 1); outlier fences sit 1.5 IQR beyond the quartiles.

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qloss/process.hpp"

namespace qloss::stats {

struct BoxSummary {
    std::size_t n = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double lower_fence = 0.0;
    double upper_fence = 0.0;
    double whisker_low = 0.0;   // smallest value inside the fences
    double whisker_high = 0.0;  // largest value inside the fences
    std::vector<double> outliers;  // ascending
};

inline constexpr double kFenceFactor = 1.5;

// Quantile at probability p in [0, 1] of already sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

// Throws DomainError for empty or non-finite input.
BoxSummary box_summary(std::span<const double> values);

struct Sample {
    ProcessKey key;
    double value = 0.0;
};

struct Grouping {
    std::map<ProcessKey, BoxSummary> by_key;
    std::map<Depo, BoxSummary> by_depo;
    std::map<Etch, BoxSummary> by_etch;
    std::map<Strip, BoxSummary> by_strip;
};

Grouping group_by_process(std::span<const Sample> samples);

struct MedianComparison {
    double ratio = 0.0;       // median(a) / median(b)
    bool first_lower = false; // median(a) < median(b)
};

// Throws DomainError for an empty summary or a zero median in b.
MedianComparison compare_medians(const BoxSummary& a, const BoxSummary& b);

}  // namespace qloss::stats
