#pragma once

#include <stdexcept>
#include <string>

namespace ipanerf {

// Error taxonomy mirrored by the C API status codes and the CLI exit codes:
// argument/format -> 2, runtime -> 3, incomplete -> 4.
enum class ErrorKind {
  argument,    // bad value, bad config, malformed input
  format,      // structurally broken file on disk
  runtime,     // divergence or other failure while running
  incomplete,  // a run directory is missing required artifacts
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg) : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_argument(const std::string& msg) { throw Error(ErrorKind::argument, msg); }
[[noreturn]] inline void fail_format(const std::string& msg) { throw Error(ErrorKind::format, msg); }
[[noreturn]] inline void fail_runtime(const std::string& msg) { throw Error(ErrorKind::runtime, msg); }
[[noreturn]] inline void fail_incomplete(const std::string& msg) { throw Error(ErrorKind::incomplete, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) throw Error(kind, msg);
}

inline void require_argument(bool cond, const std::string& msg) { require(cond, ErrorKind::argument, msg); }

}  // namespace ipanerf
