#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "calfplay/time.hpp"

namespace calfplay {

struct VideoDescriptor {
    std::string farm;
    std::string camera;
    Timestamp start_time;
    std::string filename;
};

class TimingError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parses "FarmName_CameraID_YYYYMMDD_HHMMSS.mp4". The rightmost two
/// underscore fields are date and time; the prefix splits at its last
/// underscore into farm and camera, so farm names may themselves contain
/// underscores.
VideoDescriptor parse_video_filename(const std::string& name);

enum class OcrStatus { Ok, Corrected, Failed };

struct OcrReading {
    std::int64_t frame_index = 0;
    std::string raw;
    std::optional<Timestamp> parsed;
    OcrStatus status = OcrStatus::Failed;
};

struct OcrCorrection {
    OcrStatus status = OcrStatus::Failed;
    std::string text;  // canonical "YYYY-MM-DD HH:MM:SS" when not Failed
};

/// Repairs common OCR confusions (O<->0, I/l<->1, S<->5, B<->8, Z<->2)
/// in the digit positions of the expected timestamp pattern only. No
/// fuzzy inference: anything the confusion table cannot fix is Failed.
OcrCorrection correct_ocr_string(const std::string& raw);

/// correct_ocr_string + timestamp parse for one frame.
OcrReading read_ocr(std::int64_t frame_index, const std::string& raw);

struct SeriesReport {
    std::size_t total_frames = 0;
    std::size_t successful = 0;  // parsed before any series-level repair
    double success_rate_pct = 0.0;
    std::vector<std::int64_t> monotonicity_violations;  // frame indices
    std::size_t repaired = 0;
    std::size_t unresolved = 0;  // Failed with no usable neighbours
};

struct SeriesValidationConfig {
    double outlier_factor = 2.0;        // x nominal frame interval
    std::int64_t interp_window = 25;    // frames searched for valid neighbours
};

struct SeriesResult {
    std::vector<OcrReading> readings;  // repaired copy
    SeriesReport report;
};

/// Validates a per-frame timestamp series. Isolated outliers (a parsed
/// value off by more than outlier_factor x the nominal frame interval
/// from both neighbours) and Failed frames with valid neighbours within
/// the window are repaired by linear interpolation and marked Corrected.
/// Residual non-monotonic frames are listed in the report.
SeriesResult validate_timestamp_series(std::vector<OcrReading> readings,
                                       double nominal_fps,
                                       const SeriesValidationConfig& cfg = {});

/// video_start + annotation-relative time, exact at millisecond precision.
Timestamp annotation_to_absolute(Timestamp video_start, Decisecs rel);
Timestamp annotation_to_absolute_seconds(Timestamp video_start, double seconds);

}  // namespace calfplay
