#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "box_oracle.hpp"
#include "qloss/error.hpp"
#include "qloss/process.hpp"
#include "qloss/stats.hpp"

using namespace qloss;
using namespace qloss::stats;

namespace {

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b) + 1e-24; }

}  // namespace

TEST_CASE("box summaries match the hand-computed oracle") {
    std::vector<std::size_t> sizes;
    for (const auto& o : test::kBoxOracles) {
        CAPTURE(o.values.size());
        const auto b = box_summary(o.values);
        sizes.push_back(b.n);
        CHECK(b.n == o.values.size());
        CHECK(close(b.median, o.median));
        CHECK(close(b.q1, o.q1));
        CHECK(close(b.q3, o.q3));
        CHECK(close(b.iqr, o.q3 - o.q1));
        CHECK(close(b.lower_fence, o.q1 - 1.5 * (o.q3 - o.q1)));
        CHECK(close(b.upper_fence, o.q3 + 1.5 * (o.q3 - o.q1)));
        CHECK(close(b.whisker_low, o.whisker_low));
        CHECK(close(b.whisker_high, o.whisker_high));
        CHECK(b.outliers == o.outliers);
    }
    for (std::size_t n : {1, 2, 4, 5, 18}) CHECK(std::count(sizes.begin(), sizes.end(), n) > 0);
}

TEST_CASE("small examples") {
    const auto a = box_summary(std::vector<double>{1, 2, 3, 4, 5});
    CHECK(a.median == 3);
    CHECK(a.q1 == 2);
    CHECK(a.q3 == 4);
    CHECK(a.iqr == 2);
    CHECK(a.outliers.empty());
    const auto b = box_summary(std::vector<double>{1, 2, 3, 4, 100});
    CHECK(b.upper_fence == 7);
    CHECK(b.outliers == std::vector<double>{100});
    const auto c = box_summary(std::vector<double>{7});
    CHECK(c.median == 7);
    CHECK(c.q1 == 7);
    CHECK(c.q3 == 7);
    CHECK(c.iqr == 0);
}

TEST_CASE("box_summary input errors") {
    CHECK_THROWS_AS(box_summary(std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(box_summary(std::vector<double>{1.0, std::nan("")}), DomainError);
    CHECK_THROWS_AS(box_summary(std::vector<double>{1.0, INFINITY}), DomainError);
}

TEST_CASE("partition, ordering and invariance over random vectors") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> len(1, 60);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(len(rng)));
        for (auto& x : v) x = u(rng) < 0.1 ? 20.0 * ln(rng) : ln(rng);
        const auto b = box_summary(v);
        CHECK(b.q1 <= b.median);
        CHECK(b.median <= b.q3);
        CHECK(b.iqr >= 0.0);
        CHECK(std::is_sorted(b.outliers.begin(), b.outliers.end()));

        // Every value is inside the whiskers or an outlier; together they
        // give back the input multiset.
        std::vector<double> rebuilt = b.outliers;
        for (double x : v) {
            if (x >= b.lower_fence && x <= b.upper_fence) {
                CHECK(x >= b.whisker_low);
                CHECK(x <= b.whisker_high);
                rebuilt.push_back(x);
            }
        }
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        std::sort(rebuilt.begin(), rebuilt.end());
        CHECK(rebuilt == sorted);

        auto shuffled = v;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto p = box_summary(shuffled);
        CHECK(p.median == b.median);
        CHECK(p.q1 == b.q1);
        CHECK(p.q3 == b.q3);
        CHECK(p.outliers == b.outliers);

        const double c = 1e-6 + 10.0 * u(rng);
        auto scaled = v;
        for (auto& x : scaled) x *= c;
        const auto s = box_summary(scaled);
        CHECK(s.median == doctest::Approx(c * b.median).epsilon(1e-12));
        CHECK(s.q1 == doctest::Approx(c * b.q1).epsilon(1e-12));
        CHECK(s.q3 == doctest::Approx(c * b.q3).epsilon(1e-12));
        CHECK(s.whisker_high == doctest::Approx(c * b.whisker_high).epsilon(1e-12));

        if (v.size() % 2 == 1) CHECK(b.median == sorted[v.size() / 2]);
    }
}

TEST_CASE("quantiles of sorted data") {
    const std::vector<double> s{1, 2, 4, 8};
    CHECK(quantile_sorted(s, 0.0) == 1);
    CHECK(quantile_sorted(s, 1.0) == 8);
    CHECK(quantile_sorted(s, 0.5) == 3);
    CHECK(quantile_sorted(s, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("grouping by process variation") {
    const auto alplt = parse_process_key("A/LP/LT/none");
    std::vector<Sample> samples;
    for (int i = 0; i < 18; ++i) samples.push_back({alplt, 1e-6 * (1.0 + 0.01 * i)});
    auto g = group_by_process(samples);
    REQUIRE(g.by_key.size() == 1);
    CHECK(g.by_key.at(alplt).n == 18);
    CHECK(g.by_depo.at(Depo::A).n == 18);
    CHECK(g.by_etch.at(Etch::LP).n == 18);
    CHECK(g.by_strip.at(Strip::LT).n == 18);

    samples.push_back({parse_process_key("B/LP/LT/BOE"), 2e-6});
    samples.push_back({parse_process_key("B/LP/LT/none"), 3e-6});
    g = group_by_process(samples);
    CHECK(g.by_key.size() == 3);
    CHECK(g.by_depo.at(Depo::B).n == 2);
    CHECK(g.by_etch.at(Etch::LP).n == 20);

    const auto empty = group_by_process(std::vector<Sample>{});
    CHECK(empty.by_key.empty());
    CHECK(empty.by_depo.empty());
}

TEST_CASE("median comparison") {
    const auto a = box_summary(std::vector<double>{9.67e-7});
    const auto b = box_summary(std::vector<double>{11.04e-7});
    const auto r = compare_medians(a, b);
    CHECK(std::abs(r.ratio - 0.876) < 1e-3);
    CHECK(r.first_lower);
    const auto same = compare_medians(b, b);
    CHECK(same.ratio == 1.0);
    CHECK_FALSE(same.first_lower);
    CHECK_THROWS_AS(compare_medians(a, box_summary(std::vector<double>{0.0})), DomainError);
    CHECK_THROWS_AS(compare_medians(BoxSummary{}, b), DomainError);
}
