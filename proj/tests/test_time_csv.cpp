#include <doctest.h>

#include <sstream>

#include "calfplay/csv.hpp"
#include "calfplay/time.hpp"

using namespace calfplay;

TEST_CASE("timestamp make/format round trip") {
    Timestamp t = make_timestamp(2024, 6, 15, 8, 23, 45, 120);
    CHECK(format_timestamp(t) == "2024-06-15 08:23:45");
    CHECK(format_timestamp_iso(t) == "2024-06-15T08:23:45.120Z");
    CHECK(parse_timestamp("2024-06-15 08:23:45")->ms == t.ms - 120);
    CHECK(parse_timestamp_iso("2024-06-15T08:23:45.120Z") == t);
}

TEST_CASE("timestamp parse rejects malformed and out-of-range input") {
    CHECK(!parse_timestamp("2024-13-01 00:00:00"));
    CHECK(!parse_timestamp("2024-02-30 00:00:00"));
    CHECK(!parse_timestamp("2024-06-15 24:00:00"));
    CHECK(!parse_timestamp("2024-06-15 08:61:00"));
    CHECK(!parse_timestamp("2024-O6-15 08:00:00"));
    CHECK(!parse_timestamp("garbage"));
    CHECK(!parse_timestamp(""));
}

TEST_CASE("leap day and year boundaries") {
    CHECK(parse_timestamp("2024-02-29 12:00:00"));
    CHECK(!parse_timestamp("2023-02-29 12:00:00"));
    Timestamp eve = make_timestamp(2023, 12, 31, 23, 59, 59);
    Timestamp day = make_timestamp(2024, 1, 1, 0, 0, 0);
    CHECK(day - eve == 1000);
}

TEST_CASE("iso parser accepts second-resolution input") {
    auto a = parse_timestamp_iso("2024-06-15T08:23:45Z");
    auto b = parse_timestamp_iso("2024-06-15T08:23:45.000Z");
    REQUIRE(a);
    CHECK(*a == *b);
}

TEST_CASE("decisecond parsing is exact at tenth resolution") {
    CHECK(*parse_decisecs("120.0") == 1200);
    CHECK(*parse_decisecs("3661.5") == 36615);
    CHECK(*parse_decisecs("0.1") == 1);
    CHECK(*parse_decisecs("7") == 70);
    // Values beyond the first fractional digit round to the nearest tenth.
    CHECK(*parse_decisecs("1.25") == 13);
    CHECK(*parse_decisecs("1.24") == 12);
    CHECK(!parse_decisecs("abc"));
    CHECK(!parse_decisecs(""));
    CHECK(format_decisecs(36615) == "3661.5");
    CHECK(format_decisecs(1200) == "120.0");
}

TEST_CASE("decisecond format/parse round trip") {
    for (Decisecs ds : {0LL, 1LL, 9LL, 10LL, 1234567LL})
        CHECK(*parse_decisecs(format_decisecs(ds)) == ds);
}

TEST_CASE("csv quoted fields round trip") {
    std::ostringstream out;
    csv::write_row(out, {"a", "with,comma", "with\"quote", "plain"});
    out << "x,y,z,w\n";
    std::istringstream in("h1,h2,h3,h4\n" + out.str());
    csv::Table t = csv::read_table(in);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "with,comma");
    CHECK(t.rows[0][2] == "with\"quote");
    CHECK(t.rows[1][3] == "w");
}

TEST_CASE("csv header lookup is case-insensitive") {
    std::istringstream in("Subject,Time_Relative_sf\nA,1.0\n");
    csv::Table t = csv::read_table(in);
    CHECK(t.column("subject") == 0);
    CHECK(t.column("TIME_RELATIVE_SF") == 1);
    CHECK(t.has_column("SuBjEcT"));
    CHECK(!t.has_column("missing"));
    CHECK_THROWS_AS(t.column("missing"), csv::ParseError);
}

TEST_CASE("csv short rows pad, long rows fail with the row number") {
    std::istringstream ok("a,b,c\n1,2\n");
    csv::Table t = csv::read_table(ok);
    CHECK(t.rows[0][2] == "");

    std::istringstream bad("a,b\n1,2,3\n");
    try {
        csv::read_table(bad, {}, "f.csv");
        FAIL("expected ParseError");
    } catch (const csv::ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(e.file() == "f.csv");
    }
}

TEST_CASE("csv byte-order mark is stripped") {
    std::istringstream in("\xEF\xBB\xBFname,value\nx,1\n");
    csv::Table t = csv::read_table(in);
    CHECK(t.header[0] == "name");
}

TEST_CASE("csv alternate delimiter") {
    std::istringstream in("a;b\n1;2\n");
    csv::Table t = csv::read_table(in, csv::Dialect{';', '"'});
    CHECK(t.rows[0][1] == "2");
}
