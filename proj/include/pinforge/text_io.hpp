#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pinforge::text {

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

// Strict numeric parsing: the whole field must be consumed.
double parse_double(std::string_view field, std::string_view what);
std::uint64_t parse_uint(std::string_view field, std::string_view what);

// Shortest round-trippable decimal representation of a double.
std::string format_exact(double v);
std::string format_fixed(double v, int decimals);

// Splits text into lines, dropping a trailing '\r' and skipping blank lines
// and lines that start with '#'.
std::vector<std::string_view> data_lines(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace pinforge::text
