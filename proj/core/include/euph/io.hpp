#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace euph {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file, then renames over the target, so
// concurrent readers see either the old or the new content, never a prefix.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Appends one line and flushes; used for append-only logs.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace euph
