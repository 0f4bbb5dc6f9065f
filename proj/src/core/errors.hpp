#pragma once

#include <stdexcept>
#include <string>

namespace dlsvm {

// Error classes map one-to-one onto the C API status codes and the CLI
// exit codes.
enum class ErrorKind {
  Input,      // bad user-supplied data (files, labels, empty inputs)
  Config,     // bad option values or incompatible settings
  Format,     // malformed container/checkpoint/image files
  Numeric,    // non-finite values during training, failed gradient check
  Dimension,  // tensor shape mismatch
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_input(const std::string& m) { throw Error(ErrorKind::Input, m); }
[[noreturn]] inline void throw_config(const std::string& m) { throw Error(ErrorKind::Config, m); }
[[noreturn]] inline void throw_format(const std::string& m) { throw Error(ErrorKind::Format, m); }
[[noreturn]] inline void throw_numeric(const std::string& m) { throw Error(ErrorKind::Numeric, m); }
[[noreturn]] inline void throw_dimension(const std::string& m) { throw Error(ErrorKind::Dimension, m); }
[[noreturn]] inline void throw_internal(const std::string& m) { throw Error(ErrorKind::Internal, m); }

}  // namespace dlsvm
