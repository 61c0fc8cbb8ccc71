#pragma once

#include <stdexcept>
#include <string>

namespace prosolm {

// Error classes double as process exit codes on the CLI surface.
enum class ErrorClass : int {
  usage = 2,       // bad arguments / precondition violations
  schema = 3,      // malformed files, format mismatches
  infeasible = 4,  // parameters incompatible with the data
  io = 5,          // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), cls_(cls) {}

  ErrorClass error_class() const noexcept { return cls_; }
  int exit_code() const noexcept { return static_cast<int>(cls_); }

 private:
  ErrorClass cls_;
};

inline Error usage_error(const std::string& msg) { return {ErrorClass::usage, msg}; }
inline Error schema_error(const std::string& msg) { return {ErrorClass::schema, msg}; }
inline Error infeasible_error(const std::string& msg) { return {ErrorClass::infeasible, msg}; }
inline Error io_error(const std::string& msg) { return {ErrorClass::io, msg}; }

}  // namespace prosolm
