#include "calfplay/time.hpp"

#include <array>
#include <charconv>
#include <cstdio>
#include <cstdlib>

namespace calfplay {

namespace {

// Howard Hinnant's days-from-civil algorithm.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
}

bool valid_date(int y, int mo, int d) {
    if (mo < 1 || mo > 12 || d < 1) return false;
    static constexpr std::array<int, 12> len = {31, 28, 31, 30, 31, 30,
                                                31, 31, 30, 31, 30, 31};
    int dmax = len[mo - 1];
    if (mo == 2 && (y % 4 == 0 && (y % 100 != 0 || y % 400 == 0))) dmax = 29;
    return d <= dmax;
}

bool valid_time(int h, int mi, int s) {
    return h >= 0 && h < 24 && mi >= 0 && mi < 60 && s >= 0 && s < 60;
}

std::optional<Timestamp> parse_fields(std::string_view text, char date_sep,
                                      char mid_sep) {
    // "YYYY-MM-DD HH:MM:SS" layout with configurable separators.
    if (text.size() < 19) return std::nullopt;
    if (text[4] != date_sep || text[7] != date_sep || text[10] != mid_sep ||
        text[13] != ':' || text[16] != ':')
        return std::nullopt;
    int y, mo, d, h, mi, s;
    if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
        !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
        !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), s))
        return std::nullopt;
    if (!valid_date(y, mo, d) || !valid_time(h, mi, s)) return std::nullopt;
    return make_timestamp(y, mo, d, h, mi, s);
}

}  // namespace

Timestamp make_timestamp(int year, int month, int day, int hour, int minute,
                         int second, int millisecond) {
    std::int64_t days = days_from_civil(year, month, day);
    std::int64_t ms = ((days * 24 + hour) * 60 + minute) * 60 + second;
    return Timestamp{ms * 1000 + millisecond};
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    if (text.size() != 19) return std::nullopt;
    return parse_fields(text, '-', ' ');
}

std::optional<Timestamp> parse_timestamp_iso(std::string_view text) {
    // Accept "YYYY-MM-DDTHH:MM:SS", optional ".mmm", optional trailing "Z".
    if (text.size() < 19) return std::nullopt;
    auto base = parse_fields(text.substr(0, 19), '-', 'T');
    if (!base) return std::nullopt;
    std::string_view rest = text.substr(19);
    if (!rest.empty() && rest.back() == 'Z') rest.remove_suffix(1);
    int msec = 0;
    if (!rest.empty()) {
        if (rest[0] != '.' || rest.size() != 4) return std::nullopt;
        if (!parse_int(rest.substr(1), msec)) return std::nullopt;
    }
    return *base + msec;
}

namespace {

void split_ms(Timestamp t, int& y, int& mo, int& d, int& h, int& mi, int& s,
              int& msec) {
    std::int64_t ms = t.ms;
    std::int64_t days = ms / 86400000;
    std::int64_t rem = ms % 86400000;
    if (rem < 0) {
        rem += 86400000;
        --days;
    }
    civil_from_days(days, y, mo, d);
    msec = static_cast<int>(rem % 1000);
    rem /= 1000;
    s = static_cast<int>(rem % 60);
    rem /= 60;
    mi = static_cast<int>(rem % 60);
    h = static_cast<int>(rem / 60);
}

}  // namespace

std::string format_timestamp(Timestamp t) {
    int y, mo, d, h, mi, s, msec;
    split_ms(t, y, mo, d, h, mi, s, msec);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d %02d:%02d:%02d", y, mo, d, h,
                  mi, s);
    return buf;
}

std::string format_timestamp_iso(Timestamp t) {
    int y, mo, d, h, mi, s, msec;
    split_ms(t, y, mo, d, h, mi, s, msec);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", y, mo,
                  d, h, mi, s, msec);
    return buf;
}

std::optional<Decisecs> parse_decisecs(std::string_view text) {
    if (text.empty()) return std::nullopt;
    bool neg = false;
    std::size_t i = 0;
    if (text[0] == '-') {
        neg = true;
        i = 1;
    }
    std::int64_t whole = 0;
    bool any = false;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
        whole = whole * 10 + (text[i] - '0');
        any = true;
    }
    std::int64_t tenths = 0;
    if (i < text.size()) {
        if (text[i] != '.') return std::nullopt;
        ++i;
        if (i >= text.size()) return std::nullopt;
        // First fractional digit is the tenths; round on the second.
        if (text[i] < '0' || text[i] > '9') return std::nullopt;
        tenths = text[i] - '0';
        ++i;
        if (i < text.size()) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            if (text[i] >= '5') ++tenths;
            for (++i; i < text.size(); ++i)
                if (text[i] < '0' || text[i] > '9') return std::nullopt;
        }
        any = true;
    }
    if (!any) return std::nullopt;
    std::int64_t ds = whole * 10 + tenths;
    return neg ? -ds : ds;
}

std::string format_decisecs(Decisecs ds) {
    bool neg = ds < 0;
    std::int64_t v = neg ? -ds : ds;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%lld.%lld", neg ? "-" : "",
                  static_cast<long long>(v / 10), static_cast<long long>(v % 10));
    return buf;
}

}  // namespace calfplay
