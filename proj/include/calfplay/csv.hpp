#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace calfplay::csv {

struct Dialect {
    char delimiter = ',';
    char quote = '"';
};

/// Schema or per-row failure while reading a delimited file. `row` is
/// 1-based and counts the header; 0 means "whole file".
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t row, const std::string& what)
        : std::runtime_error(file.empty()
                                 ? what
                                 : file + (row ? ":" + std::to_string(row) : "") +
                                       ": " + what),
          file_(std::move(file)),
          row_(row) {}

    const std::string& file() const { return file_; }
    std::size_t row() const { return row_; }

private:
    std::string file_;
    std::size_t row_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  // each sized like header
    std::string source;                          // for error messages

    /// Case-insensitive header lookup; throws ParseError naming the column.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

/// Reads a whole delimited file with a header row. Quoted fields may
/// contain delimiters and doubled quotes; short rows are padded with
/// empty fields, long rows are an error.
Table read_table(std::istream& in, const Dialect& dialect = {},
                 const std::string& source = "");
Table read_table_file(const std::string& path, const Dialect& dialect = {});

std::string escape_field(const std::string& field, const Dialect& dialect = {});
void write_row(std::ostream& out, const std::vector<std::string>& fields,
               const Dialect& dialect = {});

}  // namespace calfplay::csv
