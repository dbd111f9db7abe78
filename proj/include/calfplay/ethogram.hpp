#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "calfplay/csv.hpp"
#include "calfplay/time.hpp"

namespace calfplay {

enum class BehaviourCategory { Locomotor, Social, Object, Straw, NonPlayState };

/// Training-label class of a single behaviour code, derived from its
/// ethogram category unless the table overrides it.
enum class ActivityClass {
    Management,
    ActivePlay,
    NonActivePlay,
    OutOfView,
    NotPlaying,
};

std::string to_string(BehaviourCategory c);
std::string to_string(ActivityClass c);
std::optional<BehaviourCategory> category_from_string(const std::string& s);
std::optional<ActivityClass> activity_from_string(const std::string& s);

enum class EventType { StateStart, StateStop };

struct EventRecord {
    std::string subject;
    std::string behaviour;
    std::string modifier;  // carried through untouched
    EventType event_type = EventType::StateStart;
    Decisecs time_relative = 0;
    std::optional<Decisecs> duration;
};

bool operator==(const EventRecord& a, const EventRecord& b);

struct BehaviourInterval {
    std::string subject;
    std::string behaviour;
    BehaviourCategory category = BehaviourCategory::NonPlayState;
    bool play = false;
    Decisecs start = 0;
    Decisecs stop = 0;
    bool closed_at_stream_end = false;

    Decisecs duration() const { return stop - start; }
};

struct EthogramEntry {
    BehaviourCategory category;
    bool play;
    ActivityClass activity;
};

/// Closed lookup table: behaviour code -> category, play flag and
/// training-label class. Unknown codes are rejected, never defaulted.
class EthogramTable {
public:
    /// Columns: code, category, play_flag and optional activity override.
    /// Default activity: locomotor/social play -> ActivePlay, object/straw
    /// play -> NonActivePlay; non-play codes "Management" -> Management,
    /// "Out of view" -> OutOfView, everything else -> NotPlaying.
    static EthogramTable load(std::istream& in, const std::string& source = "");
    static EthogramTable load_file(const std::string& path);

    /// Builtin table seeded from the standard calf ethogram.
    static EthogramTable builtin();

    const EthogramEntry& classify(const std::string& code) const;
    bool contains(const std::string& code) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, EthogramEntry> entries_;
};

struct EventLogDialect {
    csv::Dialect csv;
};

/// Parses an Observer-style event export. Required columns (any order,
/// case-insensitive): Subject, Behaviour, Modifier, Event_Type,
/// Time_Relative_sf, Duration.
std::vector<EventRecord> parse_event_log(std::istream& in,
                                         const EventLogDialect& dialect = {},
                                         const std::string& source = "");

void write_event_log(std::ostream& out, const std::vector<EventRecord>& events,
                     const EventLogDialect& dialect = {});

struct PairingResult {
    std::vector<BehaviourInterval> intervals;
    std::vector<std::string> warnings;  // re-entrant starts, dangling starts
};

class PairingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Matches every (subject, behaviour) StateStart to the next StateStop of
/// the same subject+behaviour. Intervals of different behaviours may
/// overlap. A second StateStart before the StateStop closes the open
/// interval at the new start (warned); starts still open at stream end are
/// closed at the last observed timestamp and flagged.
PairingResult pair_state_events(std::vector<EventRecord> events,
                                const EthogramTable& table);

}  // namespace calfplay
