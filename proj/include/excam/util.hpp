#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace excam::util {

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);

// Collapses every whitespace run to a single space and trims the ends.
std::string normalize_spaces(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

// Writes via a temp file + rename so readers never observe partial content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace excam::util
