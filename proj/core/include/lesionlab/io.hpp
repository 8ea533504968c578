#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace lesionlab {

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws DataError when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

}  // namespace lesionlab
