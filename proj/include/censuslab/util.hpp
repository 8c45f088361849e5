#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace censuslab {

std::vector<std::string> split(std::string_view line, char delim);
std::string trim(std::string_view s);

// Round-trip formatting for doubles so text artifacts are byte-stable.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

}  // namespace censuslab
