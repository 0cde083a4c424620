// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scalaw {

std::string_view trim(std::string_view s);

/// Whole-string parse; nullopt on trailing garbage.
std::optional<double> parse_double(std::string_view s);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);

bool is_valid_utf8(std::string_view s);

// CSV (RFC 4180 quoting).
std::vector<std::string> split_csv_line(std::string_view line);
/// True while `line` ends inside an open quoted field.
bool csv_needs_continuation(std::string_view line);
std::string csv_escape(std::string_view field);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace scalaw
