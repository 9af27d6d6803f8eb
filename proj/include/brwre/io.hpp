#pragma once

#include <filesystem>
#include <string>

namespace brwre {

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Prefixes every line of `text` with "# " (CSV metadata block).
std::string comment_block(const std::string& text);

}  // namespace brwre
