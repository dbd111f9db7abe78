#include "calfplay/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <nlohmann/json.hpp>

namespace calfplay {

std::string to_string(ExclusionReason r) {
    switch (r) {
        case ExclusionReason::OutOfViewGap: return "out_of_view_gap";
        case ExclusionReason::Occlusion: return "occlusion";
        case ExclusionReason::SmallBbox: return "small_bbox";
        case ExclusionReason::Intensity: return "intensity";
        case ExclusionReason::MaskHallucination: return "mask_hallucination";
    }
    return "?";
}

std::size_t ExclusionReport::excluded_total() const {
    std::size_t n = 0;
    for (const auto& [r, c] : excluded) n += c;
    return n;
}

DetectionFilterResult filter_detections(const std::vector<FrameMeta>& frames,
                                        const FilterConfig& cfg) {
    DetectionFilterResult result;
    result.retained.reserve(frames.size());
    for (const auto& f : frames) {
        if (f.confidence >= cfg.min_confidence)
            result.retained.push_back(f);
        else
            ++result.excluded;
    }
    return result;
}

namespace {

// Median of the values in a bounded window; copies because the window is
// small (<= cfg.median_window).
double window_median(const std::deque<double>& window) {
    std::vector<double> v(window.begin(), window.end());
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return (v[mid - 1] + hi) / 2.0;
}

}  // namespace

FrameExclusionResult exclude_frames(const std::vector<AlignedSample>& samples,
                                    const FilterConfig& cfg) {
    FrameExclusionResult result;
    result.report.input = samples.size();

    // Group indices per track, time-ordered.
    std::map<int, std::vector<std::size_t>> tracks;
    for (std::size_t i = 0; i < samples.size(); ++i)
        tracks[samples[i].tracking_id].push_back(i);
    for (auto& [id, idx] : tracks)
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return samples[a].timestamp < samples[b].timestamp;
        });

    const std::int64_t max_gap_ms = static_cast<std::int64_t>(
        std::llround(cfg.max_out_of_view_s * 1000.0));

    std::vector<char> in_long_gap(samples.size(), 0);
    for (auto& [id, idx] : tracks) {
        std::size_t i = 0;
        while (i < idx.size()) {
            if (samples[idx[i]].final_label != FinalLabel::OutOfView) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j + 1 < idx.size() &&
                   samples[idx[j + 1]].final_label == FinalLabel::OutOfView)
                ++j;
            std::int64_t span =
                samples[idx[j]].timestamp - samples[idx[i]].timestamp;
            if (span > max_gap_ms) {
                for (std::size_t k = i; k <= j; ++k) in_long_gap[idx[k]] = 1;
                result.report.gaps.push_back(TrackGap{
                    id, samples[idx[i]].timestamp, samples[idx[j]].timestamp,
                    j - i + 1});
            }
            i = j + 1;
        }
    }

    for (auto& [id, idx] : tracks) {
        std::deque<double> bbox_areas;  // retained frames only
        for (std::size_t i : idx) {
            const AlignedSample& s = samples[i];
            std::optional<ExclusionReason> reason;
            if (in_long_gap[i])
                reason = ExclusionReason::OutOfViewGap;
            else if (s.occlusion_fraction > cfg.max_occlusion_fraction)
                reason = ExclusionReason::Occlusion;
            else if (std::min(s.bbox_w, s.bbox_h) < cfg.min_bbox_px)
                reason = ExclusionReason::SmallBbox;
            else if (s.mean_intensity < cfg.min_intensity ||
                     s.mean_intensity > cfg.max_intensity)
                reason = ExclusionReason::Intensity;
            else if (s.mask_area_px >= 0 && !bbox_areas.empty() &&
                     s.mask_area_px >
                         cfg.max_mask_area_ratio * window_median(bbox_areas))
                reason = ExclusionReason::MaskHallucination;

            if (reason) {
                ++result.report.excluded[*reason];
                result.excluded.emplace_back(s, *reason);
            } else {
                result.retained.push_back(s);
                ++result.report.retained;
                bbox_areas.push_back(s.bbox_w * s.bbox_h);
                if (bbox_areas.size() > cfg.median_window)
                    bbox_areas.pop_front();
            }
        }
    }
    return result;
}

void write_exclusion_report(std::ostream& out, const ExclusionReport& report) {
    nlohmann::json j;
    j["input"] = report.input;
    j["retained"] = report.retained;
    nlohmann::json by_reason = nlohmann::json::object();
    for (const auto& [r, c] : report.excluded) by_reason[to_string(r)] = c;
    j["excluded"] = by_reason;
    out << j.dump() << '\n';
    for (const auto& g : report.gaps) {
        nlohmann::json gj;
        gj["tracking_id"] = g.tracking_id;
        gj["gap_start"] = format_timestamp_iso(g.start);
        gj["gap_stop"] = format_timestamp_iso(g.stop);
        gj["frames"] = g.frames;
        out << gj.dump() << '\n';
    }
}

}  // namespace calfplay
