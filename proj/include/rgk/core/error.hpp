#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace rgk {

// Exit codes surfaced by the command line tool.
enum class ExitCode : int { ok = 0, usage = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

}  // namespace rgk
