#include "calfplay/ethogram.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace calfplay {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string strip(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_string(BehaviourCategory c) {
    switch (c) {
        case BehaviourCategory::Locomotor: return "Locomotor";
        case BehaviourCategory::Social: return "Social";
        case BehaviourCategory::Object: return "Object";
        case BehaviourCategory::Straw: return "Straw";
        case BehaviourCategory::NonPlayState: return "NonPlayState";
    }
    return "?";
}

std::string to_string(ActivityClass c) {
    switch (c) {
        case ActivityClass::Management: return "Management";
        case ActivityClass::ActivePlay: return "Active Playing";
        case ActivityClass::NonActivePlay: return "Non-Active Playing";
        case ActivityClass::OutOfView: return "Out of View";
        case ActivityClass::NotPlaying: return "Not Playing";
    }
    return "?";
}

std::optional<BehaviourCategory> category_from_string(const std::string& s) {
    std::string v = lower(strip(s));
    if (v == "locomotor") return BehaviourCategory::Locomotor;
    if (v == "social") return BehaviourCategory::Social;
    if (v == "object") return BehaviourCategory::Object;
    if (v == "straw") return BehaviourCategory::Straw;
    if (v == "nonplaystate" || v == "non-play" || v == "nonplay")
        return BehaviourCategory::NonPlayState;
    return std::nullopt;
}

std::optional<ActivityClass> activity_from_string(const std::string& s) {
    std::string v = lower(strip(s));
    v.erase(std::remove_if(v.begin(), v.end(),
                           [](char c) { return c == ' ' || c == '-' || c == '_'; }),
            v.end());
    if (v == "management") return ActivityClass::Management;
    if (v == "activeplaying" || v == "activeplay" || v == "active")
        return ActivityClass::ActivePlay;
    if (v == "nonactiveplaying" || v == "nonactiveplay" || v == "nonactive")
        return ActivityClass::NonActivePlay;
    if (v == "outofview") return ActivityClass::OutOfView;
    if (v == "notplaying") return ActivityClass::NotPlaying;
    return std::nullopt;
}

bool operator==(const EventRecord& a, const EventRecord& b) {
    return a.subject == b.subject && a.behaviour == b.behaviour &&
           a.modifier == b.modifier && a.event_type == b.event_type &&
           a.time_relative == b.time_relative && a.duration == b.duration;
}

namespace {

ActivityClass default_activity(const std::string& code, BehaviourCategory cat,
                               bool play) {
    if (play) {
        switch (cat) {
            case BehaviourCategory::Locomotor:
            case BehaviourCategory::Social:
                return ActivityClass::ActivePlay;
            default:
                return ActivityClass::NonActivePlay;
        }
    }
    std::string v = lower(code);
    if (v == "management") return ActivityClass::Management;
    if (v == "out of view") return ActivityClass::OutOfView;
    return ActivityClass::NotPlaying;
}

}  // namespace

EthogramTable EthogramTable::load(std::istream& in, const std::string& source) {
    csv::Table t = csv::read_table(in, {}, source);
    std::size_t c_code = t.column("code");
    std::size_t c_cat = t.column("category");
    std::size_t c_play = t.column("play_flag");
    std::optional<std::size_t> c_act;
    if (t.has_column("activity")) c_act = t.column("activity");

    EthogramTable table;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::string code = strip(row[c_code]);
        if (code.empty())
            throw csv::ParseError(source, i + 2, "empty behaviour code");
        auto cat = category_from_string(row[c_cat]);
        if (!cat)
            throw csv::ParseError(source, i + 2,
                                  "unknown category '" + row[c_cat] + "'");
        std::string pf = lower(strip(row[c_play]));
        bool play;
        if (pf == "play" || pf == "true" || pf == "1" || pf == "yes")
            play = true;
        else if (pf == "nonplay" || pf == "non-play" || pf == "false" ||
                 pf == "0" || pf == "no")
            play = false;
        else
            throw csv::ParseError(source, i + 2,
                                  "unknown play_flag '" + row[c_play] + "'");
        ActivityClass act = default_activity(code, *cat, play);
        if (c_act && !strip(row[*c_act]).empty()) {
            auto a = activity_from_string(row[*c_act]);
            if (!a)
                throw csv::ParseError(source, i + 2,
                                      "unknown activity '" + row[*c_act] + "'");
            act = *a;
        }
        if (!table.entries_.emplace(code, EthogramEntry{*cat, play, act}).second)
            throw csv::ParseError(source, i + 2, "duplicate code '" + code + "'");
    }
    if (table.entries_.empty())
        throw csv::ParseError(source, 0, "ethogram table has no entries");
    return table;
}

EthogramTable EthogramTable::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw csv::ParseError(path, 0, "cannot open file");
    return load(in, path);
}

EthogramTable EthogramTable::builtin() {
    static const char* text =
        "code,category,play_flag\n"
        "Run,Locomotor,play\n"
        "Gallop,Locomotor,play\n"
        "Buck,Locomotor,play\n"
        "Buck-kick,Locomotor,play\n"
        "Vertical leap,Locomotor,play\n"
        "Head-shake (play),Locomotor,play\n"
        "Play-bounce,Locomotor,play\n"
        "Frontal push,Social,play\n"
        "Mounting,Social,play\n"
        "Chase,Social,play\n"
        "Brush interaction,Object,play\n"
        "Pen feature interaction,Object,play\n"
        "Straw toss,Straw,play\n"
        "Straw dig,Straw,play\n"
        "Management,NonPlayState,nonplay\n"
        "Out of view,NonPlayState,nonplay\n"
        "Individual,NonPlayState,nonplay\n"
        "Milk feeding,NonPlayState,nonplay\n"
        "Not Playing,NonPlayState,nonplay\n";
    std::istringstream in(text);
    return load(in, "<builtin>");
}

const EthogramEntry& EthogramTable::classify(const std::string& code) const {
    auto it = entries_.find(code);
    if (it == entries_.end())
        throw std::runtime_error("unknown behaviour code '" + code + "'");
    return it->second;
}

bool EthogramTable::contains(const std::string& code) const {
    return entries_.count(code) != 0;
}

std::vector<EventRecord> parse_event_log(std::istream& in,
                                         const EventLogDialect& dialect,
                                         const std::string& source) {
    csv::Table t = csv::read_table(in, dialect.csv, source);
    std::size_t c_subj = t.column("Subject");
    std::size_t c_beh = t.column("Behaviour");
    std::size_t c_mod = t.column("Modifier");
    std::size_t c_type = t.column("Event_Type");
    std::size_t c_time = t.column("Time_Relative_sf");
    std::size_t c_dur = t.column("Duration");

    std::vector<EventRecord> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        std::size_t line = i + 2;
        EventRecord rec;
        rec.subject = strip(row[c_subj]);
        rec.behaviour = strip(row[c_beh]);
        rec.modifier = strip(row[c_mod]);
        std::string type = lower(strip(row[c_type]));
        type.erase(std::remove_if(type.begin(), type.end(),
                                  [](char c) { return c == ' ' || c == '_'; }),
                   type.end());
        if (type == "statestart")
            rec.event_type = EventType::StateStart;
        else if (type == "statestop")
            rec.event_type = EventType::StateStop;
        else
            throw csv::ParseError(source, line,
                                  "unknown event_type '" + row[c_type] + "'");
        auto time = parse_decisecs(strip(row[c_time]));
        if (!time || *time < 0)
            throw csv::ParseError(source, line,
                                  "unparseable time '" + row[c_time] + "'");
        rec.time_relative = *time;
        std::string dur = strip(row[c_dur]);
        if (!dur.empty() && dur != "-") {
            auto d = parse_decisecs(dur);
            if (!d)
                throw csv::ParseError(source, line,
                                      "unparseable duration '" + dur + "'");
            rec.duration = *d;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_event_log(std::ostream& out, const std::vector<EventRecord>& events,
                     const EventLogDialect& dialect) {
    csv::write_row(out,
                   {"Subject", "Behaviour", "Modifier", "Event_Type",
                    "Time_Relative_sf", "Duration"},
                   dialect.csv);
    for (const auto& e : events) {
        csv::write_row(
            out,
            {e.subject, e.behaviour, e.modifier,
             e.event_type == EventType::StateStart ? "StateStart" : "StateStop",
             format_decisecs(e.time_relative),
             e.duration ? format_decisecs(*e.duration) : ""},
            dialect.csv);
    }
}

PairingResult pair_state_events(std::vector<EventRecord> events,
                                const EthogramTable& table) {
    std::stable_sort(events.begin(), events.end(),
                     [](const EventRecord& a, const EventRecord& b) {
                         if (a.subject != b.subject) return a.subject < b.subject;
                         return a.time_relative < b.time_relative;
                     });
    Decisecs last_time = 0;
    for (const auto& e : events) last_time = std::max(last_time, e.time_relative);

    PairingResult result;
    // key: subject \x1f behaviour -> open start time
    std::map<std::string, Decisecs> open;
    auto key = [](const EventRecord& e) {
        return e.subject + '\x1f' + e.behaviour;
    };
    auto emit = [&](const EventRecord& e, Decisecs start, Decisecs stop,
                    bool dangling) {
        const auto& entry = table.classify(e.behaviour);
        if (stop <= start) return;  // zero-length state carries no time
        result.intervals.push_back(BehaviourInterval{
            e.subject, e.behaviour, entry.category, entry.play, start, stop,
            dangling});
    };

    for (const auto& e : events) {
        if (!table.contains(e.behaviour))
            throw PairingError("unknown behaviour code '" + e.behaviour +
                               "' for subject " + e.subject);
        auto it = open.find(key(e));
        if (e.event_type == EventType::StateStart) {
            if (it != open.end()) {
                result.warnings.push_back(
                    "re-entrant start: " + e.subject + "/" + e.behaviour +
                    " at " + format_decisecs(e.time_relative) +
                    " closes interval opened at " + format_decisecs(it->second));
                emit(e, it->second, e.time_relative, false);
                it->second = e.time_relative;
            } else {
                open.emplace(key(e), e.time_relative);
            }
        } else {
            if (it == open.end())
                throw PairingError("StateStop without open StateStart: " +
                                   e.subject + "/" + e.behaviour + " at " +
                                   format_decisecs(e.time_relative));
            emit(e, it->second, e.time_relative, false);
            open.erase(it);
        }
    }
    for (const auto& [k, start] : open) {
        auto sep = k.find('\x1f');
        EventRecord fake;
        fake.subject = k.substr(0, sep);
        fake.behaviour = k.substr(sep + 1);
        result.warnings.push_back("dangling start: " + fake.subject + "/" +
                                  fake.behaviour + " at " +
                                  format_decisecs(start) +
                                  " closed at stream end");
        emit(fake, start, last_time, true);
    }
    std::sort(result.intervals.begin(), result.intervals.end(),
              [](const BehaviourInterval& a, const BehaviourInterval& b) {
                  if (a.subject != b.subject) return a.subject < b.subject;
                  if (a.start != b.start) return a.start < b.start;
                  return a.behaviour < b.behaviour;
              });
    return result;
}

}  // namespace calfplay
