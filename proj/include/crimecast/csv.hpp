#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crimecast {

// Minimal CSV layer for the fixed interchange schemas. No quoting or escapes:
// none of the schemas carry free text. Every diagnostic names file, line and
// column so ingest errors are actionable.
class CsvReader {
public:
    CsvReader(std::string path, const std::vector<std::string>& expected_header);

    // Advances to the next data row; false at end of file.
    bool next();

    int line() const { return line_; }
    const std::string& path() const { return path_; }
    std::size_t columns() const { return fields_.size(); }

    const std::string& field(std::size_t col) const;
    double number(std::size_t col) const;
    std::int64_t integer(std::size_t col) const;

    [[noreturn]] void fail(std::size_t col, const std::string& msg) const;
    [[noreturn]] void fail_row(const std::string& msg) const;

private:
    std::string path_;
    std::vector<std::string> rows_;  // raw lines, header excluded
    std::vector<std::string> header_;
    std::vector<std::string> fields_;
    std::size_t cursor_ = 0;
    int line_ = 1;  // 1-based physical line of the current row
};

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& fields);

private:
    struct Impl;
    Impl* impl_;
};

// Shortest decimal form that round-trips a double exactly; keeps emitted files
// stable and generate -> ingest bit-exact.
std::string format_double(double v);
std::string format_int(std::int64_t v);

}  // namespace crimecast
