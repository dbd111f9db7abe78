#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "calfplay/alignment.hpp"

using namespace calfplay;

// Independent re-statement of the label hierarchy as a plain if-chain,
// used as the oracle for the exhaustive truth table.
static FinalLabel label_oracle(bool management, bool active, bool nonactive,
                               bool oov, bool notplaying) {
    (void)notplaying;
    if (management) return FinalLabel::Management;
    if (active) return FinalLabel::ActivePlaying;
    if (nonactive) return FinalLabel::NonActivePlaying;
    if (oov) return FinalLabel::OutOfView;
    return FinalLabel::NotPlaying;
}

TEST_CASE("label hierarchy matches the oracle for all 32 state subsets") {
    for (int bits = 0; bits < 32; ++bits) {
        bool management = bits & 1, active = bits & 2, nonactive = bits & 4,
             oov = bits & 8, notplaying = bits & 16;
        std::vector<ActivityClass> states;
        if (notplaying) states.push_back(ActivityClass::NotPlaying);
        if (oov) states.push_back(ActivityClass::OutOfView);
        if (nonactive) states.push_back(ActivityClass::NonActivePlay);
        if (active) states.push_back(ActivityClass::ActivePlay);
        if (management) states.push_back(ActivityClass::Management);
        CHECK(assign_final_label(states) ==
              label_oracle(management, active, nonactive, oov, notplaying));
    }
}

TEST_CASE("state intervals are half-open") {
    std::vector<TimedState> states = {
        {"Run", ActivityClass::ActivePlay, Timestamp{1000}, Timestamp{2000}}};
    CHECK(active_states_at(states, Timestamp{1000}).size() == 1);
    CHECK(active_states_at(states, Timestamp{1999}).size() == 1);
    CHECK(active_states_at(states, Timestamp{2000}).empty());
    CHECK(active_states_at(states, Timestamp{999}).empty());
}

static FrameMeta frame_at(std::int64_t ms, int id = 1) {
    FrameMeta f;
    f.timestamp = Timestamp{ms};
    f.tracking_id = id;
    f.w = f.h = 200;
    f.confidence = 0.9;
    f.mean_intensity = 100;
    f.crop_path = "c.png";
    f.embedding_path = "e.bin";
    return f;
}

TEST_CASE("nearest-frame matching breaks ties toward the earlier frame") {
    std::vector<FrameMeta> frames = {frame_at(1000), frame_at(2000)};
    auto r = match_annotations_to_frames({Timestamp{1500}}, frames);
    REQUIRE(r.matches.size() == 1);
    CHECK(r.matches[0].frame_index == 0);
    CHECK(r.matches[0].delta_ms == -500);
}

TEST_CASE("events beyond the tolerance are reported unmatched") {
    std::vector<FrameMeta> frames = {frame_at(0)};
    auto r = match_annotations_to_frames({Timestamp{501}}, frames, 0.5);
    CHECK(r.matches.empty());
    REQUIRE(r.unmatched_events.size() == 1);
    // Exactly at the tolerance still matches.
    auto r2 = match_annotations_to_frames({Timestamp{500}}, frames, 0.5);
    CHECK(r2.matches.size() == 1);
}

TEST_CASE("matching agrees with a brute-force oracle on random fixtures") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FrameMeta> frames;
        std::int64_t t = 0;
        int n_frames = 5 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n_frames; ++i) {
            t += 100 + static_cast<std::int64_t>(rng() % 900);
            frames.push_back(frame_at(t));
        }
        std::vector<Timestamp> events;
        int n_events = 1 + static_cast<int>(rng() % 10);
        for (int i = 0; i < n_events; ++i)
            events.push_back(Timestamp{static_cast<std::int64_t>(rng() % (t + 1000))});

        auto r = match_annotations_to_frames(events, frames, 0.5);
        std::vector<bool> matched(events.size(), false);
        for (const auto& m : r.matches) {
            matched[m.event_index] = true;
            // Brute force: no frame is strictly closer, and ties resolve
            // to the earlier frame.
            std::int64_t best = std::llabs(frames[m.frame_index].timestamp -
                                           events[m.event_index]);
            CHECK(best <= 500);
            for (std::size_t f = 0; f < frames.size(); ++f) {
                std::int64_t d =
                    std::llabs(frames[f].timestamp - events[m.event_index]);
                CHECK(d >= best);
                if (d == best) CHECK(f >= m.frame_index);
            }
        }
        for (std::size_t e = 0; e < events.size(); ++e) {
            if (matched[e]) continue;
            bool in_unmatched =
                std::find(r.unmatched_events.begin(), r.unmatched_events.end(),
                          e) != r.unmatched_events.end();
            CHECK(in_unmatched);
            for (const auto& f : frames)
                CHECK(std::llabs(f.timestamp - events[e]) > 500);
        }
    }
}

TEST_CASE("matching requires sorted frames") {
    std::vector<FrameMeta> frames = {frame_at(2000), frame_at(1000)};
    CHECK_THROWS(match_annotations_to_frames({Timestamp{1500}}, frames));
}

TEST_CASE("aligned samples report primary and secondary states by priority") {
    std::vector<TimedState> states = {
        {"Straw dig", ActivityClass::NonActivePlay, Timestamp{0}, Timestamp{5000}},
        {"Run", ActivityClass::ActivePlay, Timestamp{1000}, Timestamp{3000}},
    };
    auto samples = build_aligned_samples(states, {frame_at(2000)});
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].primary_raw == "Run");
    CHECK(samples[0].secondary_raw == "Straw dig");
    CHECK(samples[0].final_label == FinalLabel::ActivePlaying);
}

TEST_CASE("frames with no active state label as Not Playing") {
    auto samples = build_aligned_samples({}, {frame_at(1000)});
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].final_label == FinalLabel::NotPlaying);
    CHECK(samples[0].primary_raw.empty());
}

TEST_CASE("metadata table round trip") {
    std::vector<TimedState> states = {
        {"Run", ActivityClass::ActivePlay, Timestamp{500}, Timestamp{2500}},
        {"Out of view", ActivityClass::OutOfView, Timestamp{3000},
         Timestamp{4000}},
    };
    auto samples =
        build_aligned_samples(states, {frame_at(1000, 3), frame_at(3500, 3)});
    std::ostringstream out;
    build_metadata_table(out, samples);
    std::istringstream in(out.str());
    auto back = read_metadata_table(in);
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].timestamp == samples[i].timestamp);
        CHECK(back[i].primary_raw == samples[i].primary_raw);
        CHECK(back[i].final_label == samples[i].final_label);
        CHECK(back[i].tracking_id == samples[i].tracking_id);
        CHECK(back[i].embedding_path == samples[i].embedding_path);
    }
}

TEST_CASE("out-of-view rows are excluded from training in the table") {
    std::vector<TimedState> states = {{"Out of view", ActivityClass::OutOfView,
                                       Timestamp{0}, Timestamp{5000}}};
    auto samples = build_aligned_samples(states, {frame_at(1000)});
    std::ostringstream out;
    build_metadata_table(out, samples);
    CHECK(out.str().find("true") != std::string::npos);
}

TEST_CASE("metadata rows with empty artifact paths are rejected") {
    FrameMeta f = frame_at(1000);
    f.embedding_path.clear();
    auto samples = build_aligned_samples({}, {f});
    std::ostringstream out;
    CHECK_THROWS(build_metadata_table(out, samples));
}
