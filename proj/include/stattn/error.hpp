#pragma once

#include <stdexcept>
#include <string>

namespace stattn {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kParse = 3,
  kIo = 4,
  kNumeric = 5,
  kFormat = 6,
};

// Every failure inside the library surfaces as an Error; the C API maps the
// code onto its integer status values.
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

}  // namespace stattn
