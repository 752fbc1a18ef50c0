#pragma once

#include <filesystem>
#include <string>

namespace ipanerf {

// All persistent artifacts go through write-temp-then-rename so an
// interrupted run never leaves a readable half-written file.
void atomic_write(const std::filesystem::path& path, const std::string& contents);
void atomic_write(const std::filesystem::path& path, const void* data, size_t size);

std::string read_file(const std::filesystem::path& path);

}  // namespace ipanerf
