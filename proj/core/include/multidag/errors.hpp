#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace multidag {

enum class Errc {
  InvalidArgument,
  DimensionMismatch,
  NotSquare,
  UnknownVariant,
  RoundingAmbiguous,
  NotPermutationMask,
  RankDeficient,
  NonFinite,
  DimensionTooLarge,
  InconsistentStack,
  ParseError,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

// Process exit code for a failure of this kind: 1 usage, 2 data, 3 numeric.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace multidag
