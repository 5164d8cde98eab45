#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cavwatch::csv {

/// Fixed-point text with `decimals` digits, locale independent.
std::string fixed(double value, int decimals = 6);
/// Integer text when the value is integral, fixed(value) otherwise.
std::string time_stamp(double seconds);

/// Parses a double; throws MalformedCsv tagged with `line` on failure.
double parse_double(std::string_view field, std::size_t line);
std::size_t parse_index(std::string_view field, std::size_t line);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Whole-file reads/writes; throw IoError.
std::vector<std::string> read_lines(const std::filesystem::path &path);
void write_text(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

}  // namespace cavwatch::csv
