#include <doctest.h>

#include <string>
#include <vector>

#include "calfplay/timing.hpp"

using namespace calfplay;

TEST_CASE("video filename parses farm, camera and start time") {
    VideoDescriptor v = parse_video_filename("FarmA_ch03_20240615_060000.mp4");
    CHECK(v.farm == "FarmA");
    CHECK(v.camera == "ch03");
    CHECK(v.start_time == make_timestamp(2024, 6, 15, 6, 0, 0));
}

TEST_CASE("farm names may contain underscores") {
    VideoDescriptor v =
        parse_video_filename("North_Barn_cam1_20240101_120000.avi");
    CHECK(v.farm == "North_Barn");
    CHECK(v.camera == "cam1");
}

TEST_CASE("video filename errors") {
    CHECK_THROWS_AS(parse_video_filename("FarmA_20240615_060000.mp4"),
                    TimingError);
    CHECK_THROWS_AS(parse_video_filename("FarmA_ch03_20241315_060000.mp4"),
                    TimingError);
    CHECK_THROWS_AS(parse_video_filename("FarmA_ch03_20240615_250000.mp4"),
                    TimingError);
    CHECK_THROWS_AS(parse_video_filename("no_underscores.mp4"), TimingError);
}

TEST_CASE("ocr confusion table repairs digit-position misreads") {
    struct Case {
        const char* raw;
        const char* fixed;
    };
    const Case cases[] = {
        {"2O24-06-15 08:23:45", "2024-06-15 08:23:45"},  // O -> 0
        {"2024-06-I5 08:23:45", "2024-06-15 08:23:45"},  // I -> 1
        {"2024-06-l5 08:23:45", "2024-06-15 08:23:45"},  // l -> 1
        {"2024-06-15 08:23:4S", "2024-06-15 08:23:45"},  // S -> 5
        {"2024-06-15 0B:23:45", "2024-06-15 08:23:45"},  // B -> 8
        {"2024-06-15 08:Z3:45", "2024-06-15 08:23:45"},  // Z -> 2
        {"2o24-06-15 08:23:4s", "2024-06-15 08:23:45"},  // lowercase
    };
    for (const auto& c : cases) {
        OcrCorrection fix = correct_ocr_string(c.raw);
        CHECK(fix.status == OcrStatus::Corrected);
        CHECK(fix.text == c.fixed);
    }
}

TEST_CASE("clean strings pass through untouched") {
    OcrCorrection fix = correct_ocr_string("2024-06-15 08:23:45");
    CHECK(fix.status == OcrStatus::Ok);
    CHECK(fix.text == "2024-06-15 08:23:45");
}

TEST_CASE("ocr correction is idempotent") {
    OcrCorrection once = correct_ocr_string("2O24-06-15 08:23:4S");
    OcrCorrection twice = correct_ocr_string(once.text);
    CHECK(twice.status == OcrStatus::Ok);
    CHECK(twice.text == once.text);
}

TEST_CASE("unfixable strings fail rather than guess") {
    CHECK(correct_ocr_string("2X24-06-15 08:23:45").status == OcrStatus::Failed);
    CHECK(correct_ocr_string("garbage").status == OcrStatus::Failed);
    CHECK(correct_ocr_string("").status == OcrStatus::Failed);
    // Pattern characters in the wrong place are not digits to repair.
    CHECK(correct_ocr_string("2024/06/15 08:23:45").status == OcrStatus::Failed);
    // Semantically invalid even if every character is a digit.
    CHECK(correct_ocr_string("2024-13-15 08:23:45").status == OcrStatus::Failed);
}

static std::vector<OcrReading> clean_series(int n, double fps,
                                            Timestamp start) {
    std::vector<OcrReading> out;
    std::int64_t step_ms = static_cast<std::int64_t>(1000.0 / fps);
    for (int i = 0; i < n; ++i) {
        Timestamp t = start + i * step_ms;
        out.push_back(read_ocr(i, format_timestamp(t)));
    }
    return out;
}

TEST_CASE("series validation leaves a clean series alone") {
    auto readings = clean_series(100, 1.0, make_timestamp(2024, 6, 15, 6, 0, 0));
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(r.report.total_frames == 100);
    CHECK(r.report.successful == 100);
    CHECK(r.report.success_rate_pct == doctest::Approx(100.0));
    CHECK(r.report.repaired == 0);
    CHECK(r.report.monotonicity_violations.empty());
}

TEST_CASE("isolated outlier is interpolated from its neighbours") {
    auto readings = clean_series(50, 1.0, make_timestamp(2024, 6, 15, 6, 0, 0));
    Timestamp expected = *readings[20].parsed;
    readings[20].parsed = expected + 3600 * 1000;  // jumps one hour
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(r.report.repaired == 1);
    CHECK(*r.readings[20].parsed == expected);
    CHECK(r.readings[20].status == OcrStatus::Corrected);
}

TEST_CASE("failed frames interpolate within the window") {
    auto readings = clean_series(50, 1.0, make_timestamp(2024, 6, 15, 6, 0, 0));
    Timestamp expected = *readings[10].parsed;
    readings[10] = read_ocr(10, "unreadable");
    REQUIRE(readings[10].status == OcrStatus::Failed);
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(r.report.successful == 49);
    CHECK(r.report.success_rate_pct == doctest::Approx(98.0));
    CHECK(r.report.repaired == 1);
    CHECK(r.report.unresolved == 0);
    REQUIRE(r.readings[10].parsed);
    CHECK(*r.readings[10].parsed == expected);
}

TEST_CASE("success rate is counted before repair") {
    auto readings = clean_series(1000, 1.0, make_timestamp(2024, 6, 15, 6, 0, 0));
    readings[100] = read_ocr(100, "bad");
    readings[500] = read_ocr(500, "bad");
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(r.report.successful == 998);
    CHECK(r.report.success_rate_pct == doctest::Approx(99.8));
}

TEST_CASE("failed frames without usable neighbours stay unresolved") {
    std::vector<OcrReading> readings;
    for (int i = 0; i < 5; ++i) readings.push_back(read_ocr(i, "bad"));
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(r.report.unresolved == 5);
    CHECK(r.report.repaired == 0);
}

TEST_CASE("residual monotonicity violations are reported") {
    auto readings = clean_series(10, 1.0, make_timestamp(2024, 6, 15, 6, 0, 0));
    // Two adjacent swapped values are not an isolated outlier.
    std::swap(readings[4].parsed, readings[5].parsed);
    auto r = validate_timestamp_series(readings, 1.0);
    CHECK(!r.report.monotonicity_violations.empty());
}

TEST_CASE("annotation offsets are exact at millisecond resolution") {
    Timestamp start = make_timestamp(2024, 6, 15, 6, 0, 0);
    CHECK(annotation_to_absolute(start, 1) == start + 100);
    CHECK(annotation_to_absolute(start, 36615) ==
          make_timestamp(2024, 6, 15, 7, 1, 1, 500));
    CHECK(annotation_to_absolute_seconds(start, 0.001) == start + 1);
}
