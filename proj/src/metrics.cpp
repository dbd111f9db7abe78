#include "calfplay/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace calfplay {

namespace {

// Total covered length of a set of [start, stop) intervals, deciseconds.
Decisecs union_length(std::vector<std::pair<Decisecs, Decisecs>> spans) {
    std::sort(spans.begin(), spans.end());
    Decisecs total = 0;
    Decisecs cur_start = 0, cur_stop = -1;
    bool open = false;
    for (const auto& [a, b] : spans) {
        if (!open || a > cur_stop) {
            if (open) total += cur_stop - cur_start;
            cur_start = a;
            cur_stop = b;
            open = true;
        } else {
            cur_stop = std::max(cur_stop, b);
        }
    }
    if (open) total += cur_stop - cur_start;
    return total;
}

}  // namespace

PlaySummary percent_op(const std::vector<BehaviourInterval>& intervals,
                       double observation_seconds) {
    if (observation_seconds <= 0)
        throw MetricsError("observation period must be positive");
    PlaySummary s;
    s.observation_seconds = observation_seconds;

    std::vector<std::pair<Decisecs, Decisecs>> all;
    std::map<BehaviourCategory, std::vector<std::pair<Decisecs, Decisecs>>>
        by_cat;
    for (const auto& iv : intervals) {
        if (!iv.play) continue;
        all.emplace_back(iv.start, iv.stop);
        by_cat[iv.category].emplace_back(iv.start, iv.stop);
    }
    s.percent_op_total =
        static_cast<double>(union_length(std::move(all))) / 10.0 /
        observation_seconds * 100.0;
    for (auto& [cat, spans] : by_cat)
        s.percent_op_by_category[cat] =
            static_cast<double>(union_length(std::move(spans))) / 10.0 /
            observation_seconds * 100.0;
    return s;
}

void events_per_hour(const std::vector<BehaviourInterval>& intervals,
                     double observation_seconds, PlaySummary& s) {
    if (observation_seconds <= 0)
        throw MetricsError("observation period must be positive");
    const double hours = observation_seconds / 3600.0;
    for (const auto& iv : intervals) {
        if (!iv.play) continue;
        s.events_per_hour_total += 1.0 / hours;
        s.events_per_hour_by_category[iv.category] += 1.0 / hours;
        s.events_per_hour_by_behaviour[iv.behaviour] += 1.0 / hours;
    }
}

PlaySummary play_summary(const std::vector<BehaviourInterval>& intervals,
                         double observation_seconds) {
    PlaySummary s = percent_op(intervals, observation_seconds);
    events_per_hour(intervals, observation_seconds, s);
    return s;
}

std::string to_string(SpaceCategory c) {
    switch (c) {
        case SpaceCategory::LT4: return "<4";
        case SpaceCategory::S4_6: return "4-6";
        case SpaceCategory::S6_8: return "6-8";
        case SpaceCategory::S8_10: return "8-10";
        case SpaceCategory::S10_12: return "10-12";
        case SpaceCategory::S12_14: return "12-14";
        case SpaceCategory::S14_16: return "14-16";
        case SpaceCategory::S16_18: return "16-18";
    }
    return "?";
}

SpaceCategory categorize_space(double space_m2) {
    if (!(space_m2 > 0.0) || space_m2 > 18.0)
        throw MetricsError("space allowance out of range (0, 18]: " +
                           std::to_string(space_m2));
    if (space_m2 < 4.0) return SpaceCategory::LT4;
    if (space_m2 < 6.0) return SpaceCategory::S4_6;
    if (space_m2 < 8.0) return SpaceCategory::S6_8;
    if (space_m2 < 10.0) return SpaceCategory::S8_10;
    if (space_m2 < 12.0) return SpaceCategory::S10_12;
    if (space_m2 < 14.0) return SpaceCategory::S12_14;
    if (space_m2 < 16.0) return SpaceCategory::S14_16;
    return SpaceCategory::S16_18;
}

DescriptiveStats descriptive_stats(const std::vector<double>& values) {
    if (values.empty()) throw MetricsError("descriptive_stats: empty input");
    DescriptiveStats s;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    double sum = 0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace calfplay
