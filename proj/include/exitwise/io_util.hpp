#pragma once

#include <filesystem>
#include <string>

namespace exitwise {

// Writes content to a sibling temp file and renames it into place, so a
// failed command never leaves a partially written output.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace exitwise
