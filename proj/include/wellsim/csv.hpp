#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace wellsim::csv {

using Row = std::vector<std::string>;

/// Splits one CSV record. Supports double-quoted fields with "" escapes.
Row parse_line(std::string_view line);

/// Reads every record of a stream; a trailing '\r' on each line is dropped.
std::vector<Row> read(std::istream& in);
std::vector<Row> read_file(const std::string& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace wellsim::csv
