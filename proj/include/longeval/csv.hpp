#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace longeval::csv {

// Splits on commas. Fields are not quoted anywhere in the formats this
// library reads or writes.
std::vector<std::string_view> split_fields(std::string_view line);

std::string_view trim(std::string_view s);

std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

// Shortest text that round-trips to the same double.
std::string format_exact(double value);

// Fixed significant-digit rendering used by the report tables.
std::string format_sig(double value, int digits);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace longeval::csv
