#include "fsio.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace fs = std::filesystem;

namespace ipanerf {

void atomic_write(const fs::path& path, const void* data, size_t size) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail_runtime("cannot open for writing: " + tmp.string());
    out.write(static_cast<const char*>(data), std::streamsize(size));
    out.flush();
    if (!out) fail_runtime("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail_runtime("rename failed for " + path.string() + ": " + ec.message());
}

void atomic_write(const fs::path& path, const std::string& contents) {
  atomic_write(path, contents.data(), contents.size());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_format("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ipanerf
