#include "triagekit/detail/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "triagekit/errors.hpp"

namespace triagekit::detail {

bool read_csv_record(std::istream& in, std::string& record) {
    if (!std::getline(in, record)) return false;
    // a record is complete when its quote count is even
    auto quotes = static_cast<std::size_t>(std::count(record.begin(), record.end(), '"'));
    std::string more;
    while (quotes % 2 == 1 && std::getline(in, more)) {
        record.push_back('\n');
        record += more;
        quotes += static_cast<std::size_t>(std::count(more.begin(), more.end(), '"'));
    }
    return true;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF endings
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw DataError("unterminated quote in row: " + line);
    fields.push_back(cur);
    return fields;
}

std::string csv_field(const std::string& value) {
    bool needs_quotes = false;
    for (char c : value) {
        if (c == ',' || c == '"' || c == '\n') {
            needs_quotes = true;
            break;
        }
    }
    if (!value.empty() && (value.front() == ' ' || value.back() == ' ')) needs_quotes = true;
    return needs_quotes ? csv_quoted(value) : value;
}

std::string csv_quoted(const std::string& value) {
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace triagekit::detail
