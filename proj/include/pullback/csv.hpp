#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace pullback {

// Shortest decimal representation that round-trips; '.' separator, no locale.
std::string format_double(double v);

using CsvCell = std::variant<std::string, double, long long>;

// Header plus rows of raw fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string source;

    bool has_column(std::string_view name) const;
    // Throws ParseError naming the source when the column is missing.
    std::size_t column(std::string_view name) const;
    // Numeric column; a non-numeric field raises ParseError with its line.
    std::vector<double> numeric_column(std::string_view name) const;
};

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<CsvCell>>& rows);

// Fields may be double-quoted ("" escapes a quote). Rows whose field count
// differs from the header raise ParseError with the 1-based line number.
CsvTable parse_csv(std::string_view text, std::string source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace pullback
