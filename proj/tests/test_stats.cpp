#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "lmprobe/stats.hpp"

using lmprobe::Summary;
using lmprobe::summarize_values;
using lmprobe::t_quantile_975;

TEST_CASE("t quantiles match tabulated values") {
    CHECK(t_quantile_975(1) == doctest::Approx(12.7062).epsilon(1e-4));
    CHECK(t_quantile_975(2) == doctest::Approx(4.3027).epsilon(1e-4));
    CHECK(t_quantile_975(10) == doctest::Approx(2.2281).epsilon(1e-4));
    CHECK(t_quantile_975(100) == doctest::Approx(1.9840).epsilon(1e-4));
    CHECK_THROWS_AS(t_quantile_975(0), std::invalid_argument);
}

TEST_CASE("summary of {1,2,3}: mean 2, CI 2 +/- 2.484") {
    const std::vector<double> values = {1.0, 2.0, 3.0};
    const Summary s = summarize_values(values);
    CHECK(s.n == 3);
    CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.sd == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.se == doctest::Approx(0.5774).epsilon(1e-4));
    CHECK(s.ci_defined);
    CHECK(s.ci95_high - s.mean == doctest::Approx(2.484).epsilon(1e-3));
    CHECK(s.mean - s.ci95_low == doctest::Approx(2.484).epsilon(1e-3));
}

TEST_CASE("constant values give zero spread") {
    const std::vector<double> values = {1.0, 1.0, 1.0};
    const Summary s = summarize_values(values);
    CHECK(s.mean == 1.0);
    CHECK(s.sd == 0.0);
    CHECK(s.ci95_low == 1.0);
    CHECK(s.ci95_high == 1.0);
}

TEST_CASE("singleton and empty inputs leave the CI undefined") {
    const std::vector<double> one = {5.0};
    const Summary s = summarize_values(one);
    CHECK(s.n == 1);
    CHECK(s.mean == 5.0);
    CHECK_FALSE(s.ci_defined);
    CHECK(std::isnan(s.sd));

    const Summary empty = summarize_values(std::vector<double>{});
    CHECK(empty.n == 0);
    CHECK_FALSE(empty.ci_defined);
}

TEST_CASE("summaries are permutation-invariant to the bit") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    std::vector<double> values(37);
    for (double& v : values) v = dist(rng);

    const Summary base = summarize_values(values);
    for (int rep = 0; rep < 10; ++rep) {
        std::shuffle(values.begin(), values.end(), rng);
        const Summary s = summarize_values(values);
        CHECK(s.mean == base.mean);
        CHECK(s.sd == base.sd);
        CHECK(s.ci95_low == base.ci95_low);
        CHECK(s.ci95_high == base.ci95_high);
    }
}
