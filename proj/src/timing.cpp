#include "calfplay/timing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cctype>

namespace calfplay {

namespace {

const std::array<std::string, 4> kVideoExtensions = {".mp4", ".avi", ".mkv",
                                                     ".mov"};

bool all_digits(const std::string& s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

VideoDescriptor parse_video_filename(const std::string& name) {
    std::string base = name;
    auto slash = base.find_last_of("/\\");
    if (slash != std::string::npos) base = base.substr(slash + 1);

    std::string stem;
    for (const auto& ext : kVideoExtensions) {
        if (base.size() > ext.size() &&
            base.compare(base.size() - ext.size(), ext.size(), ext) == 0) {
            stem = base.substr(0, base.size() - ext.size());
            break;
        }
    }
    if (stem.empty())
        throw TimingError("unrecognized video extension: " + name);

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        auto us = stem.find('_', pos);
        if (us == std::string::npos) {
            fields.push_back(stem.substr(pos));
            break;
        }
        fields.push_back(stem.substr(pos, us - pos));
        pos = us + 1;
    }
    if (fields.size() < 4)
        throw TimingError("expected FarmName_CameraID_YYYYMMDD_HHMMSS: " + name);

    const std::string& date = fields[fields.size() - 2];
    const std::string& time = fields[fields.size() - 1];
    if (date.size() != 8 || !all_digits(date) || time.size() != 6 ||
        !all_digits(time))
        throw TimingError("malformed date/time fields in: " + name);

    std::string canonical = date.substr(0, 4) + "-" + date.substr(4, 2) + "-" +
                            date.substr(6, 2) + " " + time.substr(0, 2) + ":" +
                            time.substr(2, 2) + ":" + time.substr(4, 2);
    auto start = parse_timestamp(canonical);
    if (!start) throw TimingError("invalid date/time values in: " + name);

    VideoDescriptor d;
    d.camera = fields[fields.size() - 3];
    for (std::size_t i = 0; i + 3 < fields.size(); ++i) {
        if (i) d.farm += '_';
        d.farm += fields[i];
    }
    if (d.farm.empty())
        throw TimingError("missing farm field in: " + name);
    d.start_time = *start;
    d.filename = name;
    return d;
}

namespace {

// Expected pattern "YYYY-MM-DD HH:MM:SS": digit positions plus fixed
// separators.
constexpr const char* kPattern = "dddd-dd-dd dd:dd:dd";
constexpr std::size_t kPatternLen = 19;

std::optional<char> confused_digit(char c) {
    switch (c) {
        case 'O': case 'o': return '0';
        case 'I': case 'i': case 'l': return '1';
        case 'S': case 's': return '5';
        case 'B': return '8';
        case 'Z': case 'z': return '2';
        default: return std::nullopt;
    }
}

}  // namespace

OcrCorrection correct_ocr_string(const std::string& raw) {
    if (raw.size() != kPatternLen) return {OcrStatus::Failed, {}};
    std::string fixed = raw;
    bool changed = false;
    for (std::size_t i = 0; i < kPatternLen; ++i) {
        if (kPattern[i] == 'd') {
            if (std::isdigit(static_cast<unsigned char>(fixed[i]))) continue;
            auto d = confused_digit(fixed[i]);
            if (!d) return {OcrStatus::Failed, {}};
            fixed[i] = *d;
            changed = true;
        } else if (fixed[i] != kPattern[i]) {
            return {OcrStatus::Failed, {}};
        }
    }
    if (!parse_timestamp(fixed)) return {OcrStatus::Failed, {}};
    return {changed ? OcrStatus::Corrected : OcrStatus::Ok, fixed};
}

OcrReading read_ocr(std::int64_t frame_index, const std::string& raw) {
    OcrReading r;
    r.frame_index = frame_index;
    r.raw = raw;
    auto c = correct_ocr_string(raw);
    r.status = c.status;
    if (c.status != OcrStatus::Failed) r.parsed = parse_timestamp(c.text);
    return r;
}

SeriesResult validate_timestamp_series(std::vector<OcrReading> readings,
                                       double nominal_fps,
                                       const SeriesValidationConfig& cfg) {
    if (readings.empty())
        throw TimingError("empty timestamp series");
    if (nominal_fps <= 0) throw TimingError("nominal fps must be positive");

    SeriesResult result;
    result.report.total_frames = readings.size();
    result.report.successful = static_cast<std::size_t>(
        std::count_if(readings.begin(), readings.end(),
                      [](const OcrReading& r) { return r.parsed.has_value(); }));
    result.report.success_rate_pct =
        static_cast<double>(result.report.successful) /
        static_cast<double>(readings.size()) * 100.0;

    const double interval_ms = 1000.0 / nominal_fps;
    const double outlier_ms = cfg.outlier_factor * interval_ms;
    const std::size_t n = readings.size();

    auto interp = [&](std::size_t prev, std::size_t next,
                      std::size_t i) -> Timestamp {
        double fi = static_cast<double>(readings[i].frame_index);
        double fp = static_cast<double>(readings[prev].frame_index);
        double fn = static_cast<double>(readings[next].frame_index);
        double tp = static_cast<double>(readings[prev].parsed->ms);
        double tn = static_cast<double>(readings[next].parsed->ms);
        double frac = fn == fp ? 0.5 : (fi - fp) / (fn - fp);
        return Timestamp{static_cast<std::int64_t>(std::llround(
            tp + frac * (tn - tp)))};
    };

    // Pass 1: isolated outliers. A frame is an outlier when its parsed
    // value disagrees with both parsed neighbours by more than the
    // threshold, while the neighbours agree with each other.
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!readings[i].parsed || !readings[i - 1].parsed ||
            !readings[i + 1].parsed)
            continue;
        double prev = static_cast<double>(readings[i - 1].parsed->ms);
        double cur = static_cast<double>(readings[i].parsed->ms);
        double next = static_cast<double>(readings[i + 1].parsed->ms);
        std::int64_t dfp = readings[i].frame_index - readings[i - 1].frame_index;
        std::int64_t dfn = readings[i + 1].frame_index - readings[i].frame_index;
        bool off_prev = std::abs(cur - prev) > outlier_ms * std::max<std::int64_t>(1, dfp);
        bool off_next = std::abs(next - cur) > outlier_ms * std::max<std::int64_t>(1, dfn);
        bool neighbours_ok =
            std::abs(next - prev) <=
            outlier_ms * std::max<std::int64_t>(1, dfp + dfn);
        if (off_prev && off_next && neighbours_ok) {
            readings[i].parsed = interp(i - 1, i + 1, i);
            readings[i].status = OcrStatus::Corrected;
            ++result.report.repaired;
        }
    }

    // Pass 2: Failed frames, interpolated when both valid neighbours lie
    // within the window.
    for (std::size_t i = 0; i < n; ++i) {
        if (readings[i].parsed) continue;
        std::optional<std::size_t> prev, next;
        for (std::size_t j = i; j-- > 0;) {
            if (static_cast<std::int64_t>(i - j) > cfg.interp_window) break;
            if (readings[j].parsed) {
                prev = j;
                break;
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            if (static_cast<std::int64_t>(j - i) > cfg.interp_window) break;
            if (readings[j].parsed) {
                next = j;
                break;
            }
        }
        if (prev && next) {
            readings[i].parsed = interp(*prev, *next, i);
            readings[i].status = OcrStatus::Corrected;
            ++result.report.repaired;
        } else {
            ++result.report.unresolved;
        }
    }

    // Residual monotonicity violations.
    std::optional<Timestamp> last;
    for (const auto& r : readings) {
        if (!r.parsed) continue;
        if (last && *r.parsed < *last)
            result.report.monotonicity_violations.push_back(r.frame_index);
        last = *r.parsed;
    }

    result.readings = std::move(readings);
    return result;
}

Timestamp annotation_to_absolute(Timestamp video_start, Decisecs rel) {
    if (rel < 0) throw TimingError("negative annotation time");
    return video_start + rel * ms_per_decisec;
}

Timestamp annotation_to_absolute_seconds(Timestamp video_start, double seconds) {
    if (seconds < 0) throw TimingError("negative annotation time");
    return video_start + static_cast<std::int64_t>(std::llround(seconds * 1000.0));
}

}  // namespace calfplay
