#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calfplay/ethogram.hpp"

namespace calfplay {

struct CalfRecord {
    std::string calf_id;
    std::string farm_id;
    int age_days = 0;
    int health_category = 1;  // 1..3; category 4 calves were excluded upstream
    double space_m2 = 0.0;
    int group_size = 2;
    double milk_l_day = 0.0;
    int bedding_score = 1;  // 1..3
    double body_weight_kg = 0.0;
};

struct PlaySummary {
    double percent_op_total = 0.0;
    std::map<BehaviourCategory, double> percent_op_by_category;
    double events_per_hour_total = 0.0;
    std::map<BehaviourCategory, double> events_per_hour_by_category;
    std::map<std::string, double> events_per_hour_by_behaviour;
    double observation_seconds = 0.0;
};

class MetricsError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Play time as a percentage of the observation period. The total uses
/// the union of all play intervals (simultaneous distinct behaviours do
/// not double-count wall-clock time); per-category values use the union
/// within each category, so categories overlapping in time may sum to
/// more than the total.
PlaySummary percent_op(const std::vector<BehaviourInterval>& intervals,
                       double observation_seconds);

/// Adds interval counts per hour (per behaviour, per category, total).
void events_per_hour(const std::vector<BehaviourInterval>& intervals,
                     double observation_seconds, PlaySummary& summary);

PlaySummary play_summary(const std::vector<BehaviourInterval>& intervals,
                         double observation_seconds);

/// 2 m2 space-allowance bins. Left-closed: 8.0 falls in [8,10).
enum class SpaceCategory { LT4, S4_6, S6_8, S8_10, S10_12, S12_14, S14_16, S16_18 };

std::string to_string(SpaceCategory c);
SpaceCategory categorize_space(double space_m2);
constexpr int kSpaceCategoryCount = 8;

struct DescriptiveStats {
    double min = 0, max = 0, mean = 0;
    std::optional<double> sd;  // sample SD, n-1 denominator; absent for n=1
};

DescriptiveStats descriptive_stats(const std::vector<double>& values);

/// Default 17 h observation window (06:00-23:00).
constexpr double kDefaultObservationSeconds = 61'200.0;

}  // namespace calfplay
