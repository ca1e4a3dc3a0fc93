#include "mhdsc/eval.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mhdsc;

namespace {

RankedPredictions rp(std::initializer_list<double> s, std::initializer_list<double> r)
{
    RankedPredictions p;
    p.scores.resize(static_cast<Index>(s.size()));
    p.relevance.resize(static_cast<Index>(r.size()));
    Index i = 0;
    for (double x : s) p.scores(i++) = x;
    i = 0;
    for (double x : r) p.relevance(i++) = x;
    return p;
}

} // namespace

TEST_CASE("average_precision hand-traced cases")
{
    CHECK(average_precision(rp({0.9, 0.8, 0.7}, {1, 0, 1})) == 28.0 / 33.0);
    CHECK(average_precision(rp({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
    CHECK(average_precision(rp({5, 4, 3, 2, 1}, {0, 0, 0, 0, 1})) == doctest::Approx(0.2).epsilon(1e-15));
    // Ties go to the lower index: the relevant item at index 0 ranks first.
    CHECK(average_precision(rp({1, 1, 1}, {1, 0, 0})) == 1.0);
    CHECK(average_precision(rp({1, 1, 1}, {0, 0, 1})) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("average_precision errors")
{
    CHECK_THROWS_AS(average_precision(rp({0.1, 0.2}, {0, 0})), ValidationError);
    CHECK_THROWS_AS(average_precision(rp({0.1, 0.2}, {1})), ValidationError);
    CHECK_THROWS_AS(average_precision(rp({0.1, 0.2}, {1, 2})), ValidationError);
}

TEST_CASE("average_precision matches the oracle and its invariances")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 1 + trial % 23;
        RankedPredictions p;
        p.scores.resize(n);
        p.relevance.resize(n);
        std::vector<double> s(n);
        std::vector<int> r(n);
        for (Index i = 0; i < n; ++i) {
            s[i] = p.scores(i) = std::round(u(rng) * 4.0) / 4.0;  // coarse values force ties
            r[i] = static_cast<int>(rng() % 2);
            p.relevance(i) = r[i];
        }
        if (p.relevance.sum() == 0) {
            p.relevance(0) = 1;
            r[0] = 1;
        }
        const double ap = average_precision(p);
        CHECK(ap == doctest::Approx(oracle::ap_11pt(s, r)).epsilon(1e-14));
        CHECK(ap >= 0.0);
        CHECK(ap <= 1.0);

        RankedPredictions t = p;
        for (Index i = 0; i < n; ++i) t.scores(i) = std::exp(3.0 * p.scores(i)) - 7.0;
        CHECK(average_precision(t) == ap);

        // Duplicating the set leaves AP unchanged when scores are distinct.
        RankedPredictions distinct = p;
        for (Index i = 0; i < n; ++i) distinct.scores(i) = u(rng);
        RankedPredictions twice;
        twice.scores.resize(2 * n);
        twice.relevance.resize(2 * n);
        twice.scores << distinct.scores, distinct.scores;
        twice.relevance << p.relevance, p.relevance;
        CHECK(average_precision(twice) == doctest::Approx(average_precision(distinct)).epsilon(1e-12));
    }
}

TEST_CASE("mean_ap")
{
    CHECK(mean_ap({1.0, 0.0}) == 0.5);
    CHECK(mean_ap({0.37}) == 0.37);
    CHECK(mean_ap(std::vector<double>(20, 0.625)) == 0.625);
    CHECK_THROWS_AS(mean_ap({}), ValidationError);
}

TEST_CASE("per_class_ap marks classes without positives")
{
    Matrix scores(2, 3), labels(2, 3);
    scores << 0.9, 0.8, 0.7, 0.1, 0.2, 0.3;
    labels << 1, 0, 1, 0, 0, 0;
    const auto aps = per_class_ap(scores, labels);
    REQUIRE(aps.size() == 2);
    CHECK(*aps[0] == 28.0 / 33.0);
    CHECK_FALSE(aps[1].has_value());
    CHECK_THROWS_AS(per_class_ap(scores, labels.leftCols(2)), ValidationError);
}
