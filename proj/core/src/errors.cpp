#include "multidag/errors.hpp"

namespace multidag {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotSquare: return "NotSquare";
    case Errc::UnknownVariant: return "UnknownVariant";
    case Errc::RoundingAmbiguous: return "RoundingAmbiguous";
    case Errc::NotPermutationMask: return "NotPermutationMask";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NonFinite: return "NonFinite";
    case Errc::DimensionTooLarge: return "DimensionTooLarge";
    case Errc::InconsistentStack: return "InconsistentStack";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument:
    case Errc::UnknownVariant:
      return 1;
    case Errc::RoundingAmbiguous:
    case Errc::NotPermutationMask:
    case Errc::RankDeficient:
    case Errc::NonFinite:
      return 3;
    default:
      return 2;
  }
}

}  // namespace multidag
