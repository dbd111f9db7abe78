#include "calfplay/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace calfplay {

std::string to_string(FinalLabel l) {
    switch (l) {
        case FinalLabel::Management: return "Management";
        case FinalLabel::ActivePlaying: return "Active Playing";
        case FinalLabel::NonActivePlaying: return "Non-Active Playing";
        case FinalLabel::OutOfView: return "Out of View";
        case FinalLabel::NotPlaying: return "Not Playing";
    }
    return "?";
}

FinalLabel assign_final_label(const std::vector<ActivityClass>& states) {
    bool management = false, active = false, nonactive = false, oov = false;
    for (ActivityClass s : states) {
        switch (s) {
            case ActivityClass::Management: management = true; break;
            case ActivityClass::ActivePlay: active = true; break;
            case ActivityClass::NonActivePlay: nonactive = true; break;
            case ActivityClass::OutOfView: oov = true; break;
            case ActivityClass::NotPlaying: break;
        }
    }
    if (management) return FinalLabel::Management;
    if (active) return FinalLabel::ActivePlaying;
    if (nonactive) return FinalLabel::NonActivePlaying;
    if (oov) return FinalLabel::OutOfView;
    return FinalLabel::NotPlaying;
}

std::vector<TimedState> active_states_at(const std::vector<TimedState>& states,
                                         Timestamp t) {
    std::vector<TimedState> out;
    for (const auto& s : states)
        if (s.start <= t && t < s.stop) out.push_back(s);
    return out;
}

MatchReport match_annotations_to_frames(const std::vector<Timestamp>& events,
                                        const std::vector<FrameMeta>& frames,
                                        double tolerance_s) {
    if (!std::is_sorted(frames.begin(), frames.end(),
                        [](const FrameMeta& a, const FrameMeta& b) {
                            return a.timestamp < b.timestamp;
                        }))
        throw std::invalid_argument("frames must be sorted by timestamp");

    const std::int64_t tol_ms =
        static_cast<std::int64_t>(std::llround(tolerance_s * 1000.0));
    MatchReport report;
    std::vector<bool> frame_used(frames.size(), false);

    for (std::size_t e = 0; e < events.size(); ++e) {
        if (frames.empty()) {
            report.unmatched_events.push_back(e);
            continue;
        }
        auto it = std::lower_bound(frames.begin(), frames.end(), events[e],
                                   [](const FrameMeta& f, Timestamp t) {
                                       return f.timestamp < t;
                                   });
        std::size_t best = frames.size();
        std::int64_t best_abs = tol_ms + 1;
        auto consider = [&](std::size_t i) {
            std::int64_t d = frames[i].timestamp - events[e];
            std::int64_t a = std::llabs(d);
            // ties break toward the earlier frame
            if (a < best_abs || (a == best_abs && best != frames.size() &&
                                 frames[i].timestamp < frames[best].timestamp)) {
                best = i;
                best_abs = a;
            }
        };
        if (it != frames.begin()) consider(it - frames.begin() - 1);
        if (it != frames.end()) consider(it - frames.begin());
        if (best != frames.size() && best_abs <= tol_ms) {
            report.matches.push_back(
                {e, best, frames[best].timestamp - events[e]});
            frame_used[best] = true;
        } else {
            report.unmatched_events.push_back(e);
        }
    }
    for (std::size_t i = 0; i < frames.size(); ++i)
        if (!frame_used[i]) report.unmatched_frames.push_back(i);
    return report;
}

std::vector<AlignedSample> build_aligned_samples(
    const std::vector<TimedState>& states,
    const std::vector<FrameMeta>& frames) {
    std::vector<AlignedSample> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        auto active = active_states_at(states, f.timestamp);
        std::stable_sort(active.begin(), active.end(),
                         [](const TimedState& a, const TimedState& b) {
                             if (a.activity != b.activity)
                                 return static_cast<int>(a.activity) <
                                        static_cast<int>(b.activity);
                             return a.start < b.start;
                         });
        AlignedSample s;
        s.timestamp = f.timestamp;
        s.tracking_id = f.tracking_id;
        s.crop_path = f.crop_path;
        s.embedding_path = f.embedding_path;
        s.bbox_w = f.w;
        s.bbox_h = f.h;
        s.confidence = f.confidence;
        s.mean_intensity = f.mean_intensity;
        s.occlusion_fraction = f.occlusion_fraction;
        s.mask_area_px = f.mask_area_px;
        std::vector<ActivityClass> classes;
        classes.reserve(active.size());
        for (const auto& st : active) classes.push_back(st.activity);
        s.final_label = assign_final_label(classes);
        if (!active.empty()) {
            s.primary_raw = active[0].behaviour;
            s.primary_label = to_string(active[0].activity);
        }
        if (active.size() > 1) {
            s.secondary_raw = active[1].behaviour;
            s.secondary_label = to_string(active[1].activity);
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

const std::vector<std::string> kMetadataHeader = {
    "Timestamp",       "Primary_Raw",     "Primary_Label",
    "Secondary_Raw",   "Secondary_Label", "ID",
    "Final_Label",     "Frame_Directory", "Embeddings_Directory",
    "Excluded_From_Training",
    // frame-quality columns consumed by the exclusion filters
    "Bbox_W", "Bbox_H", "Confidence", "Mean_Intensity", "Occlusion_Fraction",
    "Mask_Area"};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

FinalLabel final_label_from_string(const std::string& s) {
    auto a = activity_from_string(s);
    if (!a) throw std::runtime_error("unknown Final_Label '" + s + "'");
    switch (*a) {
        case ActivityClass::Management: return FinalLabel::Management;
        case ActivityClass::ActivePlay: return FinalLabel::ActivePlaying;
        case ActivityClass::NonActivePlay: return FinalLabel::NonActivePlaying;
        case ActivityClass::OutOfView: return FinalLabel::OutOfView;
        case ActivityClass::NotPlaying: return FinalLabel::NotPlaying;
    }
    return FinalLabel::NotPlaying;
}

}  // namespace

void build_metadata_table(std::ostream& out,
                          const std::vector<AlignedSample>& samples) {
    csv::write_row(out, kMetadataHeader);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.crop_path.empty() || s.embedding_path.empty())
            throw std::runtime_error("row " + std::to_string(i + 1) +
                                     ": empty frame or embedding path");
        csv::write_row(
            out, {format_timestamp_iso(s.timestamp), s.primary_raw,
                  s.primary_label, s.secondary_raw, s.secondary_label,
                  std::to_string(s.tracking_id), to_string(s.final_label),
                  s.crop_path, s.embedding_path,
                  s.final_label == FinalLabel::OutOfView ? "true" : "false",
                  num(s.bbox_w), num(s.bbox_h), num(s.confidence),
                  num(s.mean_intensity), num(s.occlusion_fraction),
                  num(s.mask_area_px)});
    }
}

std::vector<AlignedSample> read_metadata_table(std::istream& in,
                                               const std::string& source) {
    csv::Table t = csv::read_table(in, {}, source);
    auto col = [&](const char* c) { return t.column(c); };
    std::size_t c_ts = col("Timestamp"), c_praw = col("Primary_Raw"),
                c_plab = col("Primary_Label"), c_sraw = col("Secondary_Raw"),
                c_slab = col("Secondary_Label"), c_id = col("ID"),
                c_final = col("Final_Label"), c_crop = col("Frame_Directory"),
                c_emb = col("Embeddings_Directory"), c_w = col("Bbox_W"),
                c_h = col("Bbox_H"), c_conf = col("Confidence"),
                c_int = col("Mean_Intensity"), c_occ = col("Occlusion_Fraction"),
                c_mask = col("Mask_Area");
    std::vector<AlignedSample> out;
    out.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        AlignedSample s;
        auto ts = parse_timestamp_iso(r[c_ts]);
        if (!ts)
            throw csv::ParseError(source, i + 2,
                                  "bad timestamp '" + r[c_ts] + "'");
        s.timestamp = *ts;
        s.primary_raw = r[c_praw];
        s.primary_label = r[c_plab];
        s.secondary_raw = r[c_sraw];
        s.secondary_label = r[c_slab];
        s.tracking_id = std::stoi(r[c_id]);
        s.final_label = final_label_from_string(r[c_final]);
        s.crop_path = r[c_crop];
        s.embedding_path = r[c_emb];
        s.bbox_w = std::stod(r[c_w]);
        s.bbox_h = std::stod(r[c_h]);
        s.confidence = std::stod(r[c_conf]);
        s.mean_intensity = std::stod(r[c_int]);
        s.occlusion_fraction = std::stod(r[c_occ]);
        s.mask_area_px = std::stod(r[c_mask]);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace calfplay
