#pragma once

#include <stdexcept>
#include <string>

namespace cavopt {

// Error taxonomy mirrors the CLI exit codes: config -> 1, numeric -> 2,
// assertion -> 3.
class Error : public std::runtime_error {
 public:
  enum class Kind { config = 1, numeric = 2, assertion = 3 };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) {
  throw Error(Error::Kind::config, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& msg) {
  throw Error(Error::Kind::numeric, msg);
}
[[noreturn]] inline void throw_assertion(const std::string& msg) {
  throw Error(Error::Kind::assertion, msg);
}

inline void require(bool ok, Error::Kind kind, const std::string& msg) {
  if (!ok) throw Error(kind, msg);
}

}  // namespace cavopt
