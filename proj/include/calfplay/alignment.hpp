#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "calfplay/ethogram.hpp"
#include "calfplay/time.hpp"

namespace calfplay {

/// One detected-calf frame record from the upstream tracker.
struct FrameMeta {
    Timestamp timestamp;
    int tracking_id = 0;
    double x = 0, y = 0, w = 0, h = 0;  // bbox, pixels
    double confidence = 0.0;            // [0,1]
    double mean_intensity = 0.0;        // [0,255]
    double occlusion_fraction = 0.0;    // [0,1]
    double mask_area_px = -1.0;         // segmentation mask area; <0 = absent
    std::string crop_path;
    std::string embedding_path;

    double bbox_area() const { return w * h; }
};

/// Behaviour interval on the absolute clock, pre-classified for labelling.
struct TimedState {
    std::string behaviour;
    ActivityClass activity = ActivityClass::NotPlaying;
    Timestamp start;
    Timestamp stop;
};

enum class FinalLabel {
    Management,
    ActivePlaying,
    NonActivePlaying,
    OutOfView,
    NotPlaying,
};

std::string to_string(FinalLabel l);

/// Hierarchy: Management overrides everything, then Active Playing, then
/// Non-Active Playing, then Out of View, else Not Playing.
FinalLabel assign_final_label(const std::vector<ActivityClass>& states);

/// States whose [start, stop) interval contains t.
std::vector<TimedState> active_states_at(const std::vector<TimedState>& states,
                                         Timestamp t);

struct FrameMatch {
    std::size_t event_index;
    std::size_t frame_index;
    std::int64_t delta_ms;  // frame time - event time
};

struct MatchReport {
    std::vector<FrameMatch> matches;
    std::vector<std::size_t> unmatched_events;
    std::vector<std::size_t> unmatched_frames;
};

/// Matches each event instant to the nearest frame with |dt| <= tolerance,
/// ties broken toward the earlier frame. Frames must be sorted by
/// timestamp. Nothing is dropped silently: unmatched events and frames
/// are reported.
MatchReport match_annotations_to_frames(const std::vector<Timestamp>& events,
                                        const std::vector<FrameMeta>& frames,
                                        double tolerance_s = 0.5);

struct AlignedSample {
    Timestamp timestamp;
    std::string primary_raw;
    std::string primary_label;
    std::string secondary_raw;
    std::string secondary_label;
    int tracking_id = 0;
    FinalLabel final_label = FinalLabel::NotPlaying;
    std::string crop_path;
    std::string embedding_path;
    // Duplicated from FrameMeta so the exclusion filters downstream can
    // run off the aligned table alone.
    double bbox_w = 0, bbox_h = 0;
    double confidence = 0.0;
    double mean_intensity = 0.0;
    double occlusion_fraction = 0.0;
    double mask_area_px = -1.0;
};

/// Labels each frame with the states active at its timestamp. Primary is
/// the highest-priority concurrent state, secondary the next one (empty
/// if the frame carries a single state).
std::vector<AlignedSample> build_aligned_samples(
    const std::vector<TimedState>& states, const std::vector<FrameMeta>& frames);

/// Writes the integrated metadata table. Column set is fixed; Out of View
/// rows carry Excluded_From_Training=true.
void build_metadata_table(std::ostream& out,
                          const std::vector<AlignedSample>& samples);

std::vector<AlignedSample> read_metadata_table(std::istream& in,
                                               const std::string& source = "");

}  // namespace calfplay
