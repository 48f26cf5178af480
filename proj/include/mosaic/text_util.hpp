#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mosaic {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Collapses runs of whitespace into a single space and trims.
std::string collapse_whitespace(std::string_view s);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

// Round half away from zero at 3 decimals, formatted with exactly three digits.
double round3(double v);
std::string format3(double v);

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// Current UTC time as ISO-8601 with seconds precision.
std::string utc_timestamp();

} // namespace mosaic
