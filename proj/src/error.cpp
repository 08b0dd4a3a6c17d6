#include "sosflow/error.hpp"

namespace sosflow {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotInvertible: return "NotInvertible";
    case ErrorKind::kNoConvergence: return "NoConvergence";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNonFinite: return "NonFinite";
    case ErrorKind::kDomain: return "DomainError";
    case ErrorKind::kOverflow: return "Overflow";
    case ErrorKind::kInvalidData: return "InvalidData";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kFormatVersionMismatch: return "FormatVersionMismatch";
    case ErrorKind::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::kUnknownDataset: return "UnknownDataset";
    case ErrorKind::kParse: return "ParseError";
    case ErrorKind::kEmptyData: return "EmptyData";
    case ErrorKind::kInvalidFractions: return "InvalidFractions";
    case ErrorKind::kUnsupported: return "Unsupported";
  }
  return "Unknown";
}

}  // namespace sosflow
