#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmc {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Strict decimal parse of a whole field; throws ConfigError otherwise.
double parse_number(const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const;
};

/// Same shape with the cells kept as text (for files with label columns).
struct CsvText {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;

    std::size_t column(const std::string& name) const;
};

CsvText read_csv_text(const std::string& path);

/// Numeric CSV with a single header line. Throws MissingArtifact when the
/// file is absent and ConfigError (with line number) on malformed content.
CsvTable read_csv(const std::string& path);

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);
void write_csv_row(std::ostream& os, const std::vector<double>& values);

}  // namespace dmc
