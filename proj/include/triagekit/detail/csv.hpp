#pragma once

#include <istream>
#include <string>
#include <vector>

namespace triagekit::detail {

/// Read one logical CSV record: a quoted field may span physical lines, so
/// lines are joined until the quotes balance. Returns false at end of input.
bool read_csv_record(std::istream& in, std::string& record);

/// Split one CSV record. Fields may be double-quoted; embedded quotes are
/// doubled; quoted fields may contain commas and newlines.
std::vector<std::string> split_csv_line(const std::string& line);

/// Quote a field if it contains a comma, quote, or leading/trailing space.
std::string csv_field(const std::string& value);

/// Always-quoted variant (used for free text columns).
std::string csv_quoted(const std::string& value);

std::string format_double(double v); // shortest round-trip form

} // namespace triagekit::detail
