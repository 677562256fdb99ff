#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fmprog::csv {

/// Shortest decimal text that parses back to the same double.
std::string format(double value);

double parse_double(std::string_view text);
int parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Whole-file table with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws a parse error if absent.
    std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& file);

}  // namespace fmprog::csv
