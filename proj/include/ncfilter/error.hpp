#pragma once

#include <stdexcept>
#include <string>

namespace ncfilter {

enum class ErrorCode {
  invalid_argument = 1,
  config = 2,
  numeric = 3,
  io = 4,
  verification = 5,
  internal = 6,
};

// Every failure raised by the library carries a code so the C API can map it
// onto an ncf_status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace ncfilter
