#include "crimecast/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "crimecast/errors.hpp"

namespace crimecast {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(',');
        out += parts[i];
    }
    return out;
}

}  // namespace

CsvReader::CsvReader(std::string path, const std::vector<std::string>& expected_header)
    : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) throw ValidationError(path_ + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path_ + ": empty file, expected header");
    header_ = split_line(line);
    if (header_ != expected_header) {
        throw ValidationError(path_ + ":1: header mismatch: expected \"" + join(expected_header) +
                              "\", found \"" + join(header_) + "\"");
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line != "\r") rows_.push_back(line);
        else rows_.push_back(line);  // keep blank lines so line numbers stay physical
    }
}

bool CsvReader::next() {
    while (cursor_ < rows_.size()) {
        const std::string& raw = rows_[cursor_];
        ++cursor_;
        line_ = static_cast<int>(cursor_) + 1;  // +1 for the header line
        if (raw.empty() || raw == "\r") continue;
        fields_ = split_line(raw);
        if (fields_.size() != header_.size()) {
            fail_row("expected " + std::to_string(header_.size()) + " fields, found " +
                     std::to_string(fields_.size()));
        }
        return true;
    }
    return false;
}

const std::string& CsvReader::field(std::size_t col) const {
    if (col >= fields_.size()) fail_row("column index out of range");
    return fields_[col];
}

double CsvReader::number(std::size_t col) const {
    const std::string& s = field(col);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        fail(col, "not a number: \"" + s + "\"");
    }
    return v;
}

std::int64_t CsvReader::integer(std::size_t col) const {
    const std::string& s = field(col);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        fail(col, "not an integer: \"" + s + "\"");
    }
    return v;
}

void CsvReader::fail(std::size_t col, const std::string& msg) const {
    std::string name = col < header_.size() ? header_[col] : std::to_string(col);
    throw ValidationError(path_ + ":" + std::to_string(line_) + ": column " + name + ": " + msg);
}

void CsvReader::fail_row(const std::string& msg) const {
    throw ValidationError(path_ + ":" + std::to_string(line_) + ": " + msg);
}

struct CsvWriter::Impl {
    std::ofstream out;
    std::string path;
    std::size_t width;
};

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : impl_(new Impl{std::ofstream(path), path, header.size()}) {
    if (!impl_->out) {
        delete impl_;
        throw ValidationError(path + ": cannot open for writing");
    }
    impl_->out << join(header) << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != impl_->width) {
        throw ValidationError(impl_->path + ": row width " + std::to_string(fields.size()) +
                              " does not match header width " + std::to_string(impl_->width));
    }
    impl_->out << join(fields) << "\n";
}

std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_int(std::int64_t v) { return std::to_string(v); }

}  // namespace crimecast
