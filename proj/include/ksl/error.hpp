#pragma once

#include <stdexcept>
#include <string>

namespace ksl {

enum class ErrorKind {
  domain,      // precondition on an argument violated
  parse,       // input text or binary could not be read
  validation,  // input parsed but failed a content check
  numerical,   // computation left its regime of validity
  io           // filesystem failure
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::domain, what);
}

}  // namespace ksl
