#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "calfplay/alignment.hpp"

namespace calfplay {

struct FilterConfig {
    double min_confidence = 0.55;       // keep confidence >= threshold
    double max_out_of_view_s = 5.0;     // exclude runs strictly longer
    double max_occlusion_fraction = 0.5;
    double min_bbox_px = 100.0;         // smallest bbox dimension
    double min_intensity = 30.0;        // exclude strictly below
    double max_intensity = 225.0;       // exclude strictly above
    double max_mask_area_ratio = 2.0;   // x running-median bbox area
    std::size_t median_window = 200;    // retained frames per track
};

enum class ExclusionReason {
    OutOfViewGap,
    Occlusion,
    SmallBbox,
    Intensity,
    MaskHallucination,
};

std::string to_string(ExclusionReason r);

struct TrackGap {
    int tracking_id;
    Timestamp start;
    Timestamp stop;
    std::size_t frames;
};

struct ExclusionReport {
    std::map<ExclusionReason, std::size_t> excluded;
    std::size_t retained = 0;
    std::size_t input = 0;
    std::vector<TrackGap> gaps;

    std::size_t excluded_total() const;
};

struct DetectionFilterResult {
    std::vector<FrameMeta> retained;
    std::size_t excluded = 0;
};

/// Detection-confidence gate, inclusive at the threshold.
DetectionFilterResult filter_detections(const std::vector<FrameMeta>& frames,
                                        const FilterConfig& cfg);

struct FrameExclusionResult {
    std::vector<AlignedSample> retained;
    std::vector<std::pair<AlignedSample, ExclusionReason>> excluded;
    ExclusionReport report;
};

/// Frame-exclusion criteria, applied per track in time order. Reason
/// attribution is first-match in the order: out-of-view gap, occlusion,
/// small bbox, intensity, mask hallucination. The hallucination filter
/// compares mask area against the running median bbox area over the
/// track's recent retained frames.
FrameExclusionResult exclude_frames(const std::vector<AlignedSample>& samples,
                                    const FilterConfig& cfg);

/// One JSON object per track, for audit.
void write_exclusion_report(std::ostream& out, const ExclusionReport& report);

}  // namespace calfplay
