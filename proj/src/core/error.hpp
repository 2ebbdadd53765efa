// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace energy_ood {

enum class ErrorCode {
  kInvalidArgument = 1,
  kOutOfRange = 2,
  kParse = 3,
  kIo = 4,
  kNumerical = 5,
};

// Every failure raised by the core library carries one of the codes above so
// the C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace energy_ood
