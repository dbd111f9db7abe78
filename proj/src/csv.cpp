#include "calfplay/csv.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace calfplay::csv {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
}

// One logical CSV record; handles quoted fields spanning lines.
bool read_record(std::istream& in, const Dialect& d,
                 std::vector<std::string>& out, std::size_t& line_no) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool started = false;
    int c;
    while ((c = in.get()) != std::istream::traits_type::eof()) {
        started = true;
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == d.quote) {
                if (in.peek() == d.quote) {
                    field.push_back(d.quote);
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (ch == '\n') ++line_no;
                field.push_back(ch);
            }
        } else if (ch == d.quote && field.empty()) {
            in_quotes = true;
        } else if (ch == d.delimiter) {
            out.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            ++line_no;
            break;
        } else if (ch == '\r') {
            // swallow; \r\n handled by the following \n
        } else {
            field.push_back(ch);
        }
    }
    if (!started) return false;
    out.push_back(std::move(field));
    return true;
}

}  // namespace

std::size_t Table::column(const std::string& name) const {
    std::string want = lower(name);
    for (std::size_t i = 0; i < header.size(); ++i)
        if (lower(header[i]) == want) return i;
    throw ParseError(source, 1, "missing column '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
    std::string want = lower(name);
    for (const auto& h : header)
        if (lower(h) == want) return true;
    return false;
}

Table read_table(std::istream& in, const Dialect& dialect,
                 const std::string& source) {
    Table t;
    t.source = source;
    std::size_t line_no = 1;
    if (!read_record(in, dialect, t.header, line_no))
        throw ParseError(source, 0, "empty file (no header)");
    // Strip a UTF-8 BOM if the export added one.
    if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0)
        t.header[0].erase(0, 3);
    std::vector<std::string> rec;
    std::size_t row_line = line_no;
    while (read_record(in, dialect, rec, line_no)) {
        if (rec.size() == 1 && rec[0].empty()) {
            row_line = line_no;
            continue;  // blank line
        }
        if (rec.size() > t.header.size())
            throw ParseError(source, row_line,
                             "row has " + std::to_string(rec.size()) +
                                 " fields, header has " +
                                 std::to_string(t.header.size()));
        rec.resize(t.header.size());
        t.rows.push_back(rec);
        row_line = line_no;
    }
    return t;
}

Table read_table_file(const std::string& path, const Dialect& dialect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return read_table(in, dialect, path);
}

std::string escape_field(const std::string& field, const Dialect& d) {
    bool need = field.find(d.delimiter) != std::string::npos ||
                field.find(d.quote) != std::string::npos ||
                field.find('\n') != std::string::npos ||
                field.find('\r') != std::string::npos;
    if (!need) return field;
    std::string out;
    out.push_back(d.quote);
    for (char c : field) {
        if (c == d.quote) out.push_back(d.quote);
        out.push_back(c);
    }
    out.push_back(d.quote);
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields,
               const Dialect& d) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.put(d.delimiter);
        out << escape_field(fields[i], d);
    }
    out.put('\n');
}

}  // namespace calfplay::csv
