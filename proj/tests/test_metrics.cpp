#include <doctest.h>

#include <cmath>
#include <random>

#include "calfplay/metrics.hpp"

using namespace calfplay;

static BehaviourInterval interval(Decisecs start, Decisecs stop,
                                  BehaviourCategory cat, bool play = true,
                                  const char* code = "Run") {
    BehaviourInterval iv;
    iv.subject = "C1";
    iv.behaviour = code;
    iv.category = cat;
    iv.play = play;
    iv.start = start;
    iv.stop = stop;
    return iv;
}

TEST_CASE("percent of observation period from a single interval") {
    // 612 s of play over 61,200 s is exactly 1%.
    auto s = percent_op({interval(0, 6120, BehaviourCategory::Locomotor)},
                        61'200.0);
    CHECK(s.percent_op_total == doctest::Approx(1.0));
    CHECK(s.percent_op_by_category[BehaviourCategory::Locomotor] ==
          doctest::Approx(1.0));
}

TEST_CASE("overlapping play intervals never double-count time") {
    auto s = percent_op({interval(0, 100, BehaviourCategory::Locomotor),
                         interval(50, 150, BehaviourCategory::Locomotor)},
                        1000.0);
    // Union is [0,150) deciseconds = 15 s of 1000 s.
    CHECK(s.percent_op_total == doctest::Approx(1.5));
}

TEST_CASE("percent op is invariant under splitting an interval") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Decisecs start = rng() % 1000;
        Decisecs len = 2 + rng() % 500;
        Decisecs cut = start + 1 + static_cast<Decisecs>(rng() % (len - 1));
        auto whole = percent_op(
            {interval(start, start + len, BehaviourCategory::Social)}, 5000.0);
        auto split = percent_op(
            {interval(start, cut, BehaviourCategory::Social),
             interval(cut, start + len, BehaviourCategory::Social)},
            5000.0);
        CHECK(whole.percent_op_total ==
              doctest::Approx(split.percent_op_total));
    }
}

TEST_CASE("non-play intervals contribute nothing") {
    auto s = percent_op({interval(0, 1000, BehaviourCategory::NonPlayState,
                                  false, "Management")},
                        1000.0);
    CHECK(s.percent_op_total == 0.0);
    CHECK(s.percent_op_by_category.count(BehaviourCategory::NonPlayState) == 0);
}

TEST_CASE("category percentages sum to the total when disjoint in time") {
    auto s = percent_op({interval(0, 100, BehaviourCategory::Locomotor),
                         interval(200, 300, BehaviourCategory::Social),
                         interval(400, 500, BehaviourCategory::Straw)},
                        1000.0);
    double sum = 0;
    for (const auto& [cat, pct] : s.percent_op_by_category) sum += pct;
    CHECK(sum == doctest::Approx(s.percent_op_total));
}

TEST_CASE("concurrent categories may sum past the total") {
    auto s = percent_op({interval(0, 100, BehaviourCategory::Locomotor),
                         interval(0, 100, BehaviourCategory::Social)},
                        1000.0);
    CHECK(s.percent_op_total == doctest::Approx(1.0));
    CHECK(s.percent_op_by_category[BehaviourCategory::Locomotor] ==
          doctest::Approx(1.0));
    CHECK(s.percent_op_by_category[BehaviourCategory::Social] ==
          doctest::Approx(1.0));
}

TEST_CASE("events per hour") {
    PlaySummary s = play_summary({interval(0, 100, BehaviourCategory::Locomotor),
                                  interval(200, 300, BehaviourCategory::Social)},
                                 3600.0);
    CHECK(s.events_per_hour_total == doctest::Approx(2.0));
    CHECK(s.events_per_hour_by_category[BehaviourCategory::Social] ==
          doctest::Approx(1.0));
    CHECK(s.events_per_hour_by_behaviour["Run"] == doctest::Approx(2.0));
}

TEST_CASE("zero observation time is rejected") {
    CHECK_THROWS_AS(percent_op({}, 0.0), MetricsError);
    CHECK_THROWS_AS(percent_op({}, -5.0), MetricsError);
}

TEST_CASE("space categories are left-closed 2 m2 bins") {
    CHECK(categorize_space(3.9) == SpaceCategory::LT4);
    CHECK(categorize_space(4.0) == SpaceCategory::S4_6);
    CHECK(categorize_space(5.99) == SpaceCategory::S4_6);
    CHECK(categorize_space(6.0) == SpaceCategory::S6_8);
    CHECK(categorize_space(8.0) == SpaceCategory::S8_10);
    CHECK(categorize_space(16.0) == SpaceCategory::S16_18);
    CHECK(categorize_space(18.0) == SpaceCategory::S16_18);
    CHECK_THROWS_AS(categorize_space(0.0), MetricsError);
    CHECK_THROWS_AS(categorize_space(-1.0), MetricsError);
    CHECK_THROWS_AS(categorize_space(18.01), MetricsError);
}

TEST_CASE("descriptive stats match a two-pass oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-10, 10);
    std::vector<double> v(37);
    for (auto& x : v) x = u(rng);

    DescriptiveStats s = descriptive_stats(v);
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    CHECK(s.mean == doctest::Approx(mean));
    REQUIRE(s.sd);
    CHECK(*s.sd == doctest::Approx(sd));
    CHECK(s.min == *std::min_element(v.begin(), v.end()));
    CHECK(s.max == *std::max_element(v.begin(), v.end()));
}

TEST_CASE("single observation has no sample deviation") {
    DescriptiveStats s = descriptive_stats({4.2});
    CHECK(s.mean == 4.2);
    CHECK(!s.sd);
    CHECK_THROWS_AS(descriptive_stats({}), MetricsError);
}
