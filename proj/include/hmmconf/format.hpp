#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hmmconf {

// Shortest round-trip decimal representation, locale-independent.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

// Splits on commas; no quoting support (nothing here emits quoted fields).
std::vector<std::string> split_csv_line(std::string_view line);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace hmmconf
