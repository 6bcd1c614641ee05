#include "deepida/error.hpp"

namespace deepida {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::InvalidLabels: return "InvalidLabels";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidBatch: return "InvalidBatch";
    case ErrorKind::InvalidTape: return "InvalidTape";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::StratificationFailure: return "StratificationFailure";
    case ErrorKind::PairFailed: return "PairFailed";
    case ErrorKind::NoResults: return "NoResults";
    case ErrorKind::InvalidSelection: return "InvalidSelection";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace deepida
