#pragma once

#include <stdexcept>
#include <string>

namespace sosflow {

enum class ErrorKind {
  kNotInvertible,
  kNoConvergence,
  kInvalidConfig,
  kDimensionMismatch,
  kNonFinite,
  kDomain,
  kOverflow,
  kInvalidData,
  kIo,
  kFormatVersionMismatch,
  kChecksumMismatch,
  kUnknownDataset,
  kParse,
  kEmptyData,
  kInvalidFractions,
  kUnsupported,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sosflow
