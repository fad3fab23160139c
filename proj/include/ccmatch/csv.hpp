#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ccmatch::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full field; throws FormatError on trailing garbage.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

/// Reads a CSV file, checks the header, and returns the data rows.
std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 const std::vector<std::string>& expected_header);

}  // namespace ccmatch::csv
