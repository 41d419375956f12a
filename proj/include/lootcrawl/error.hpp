#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lootcrawl {

enum class ErrorCode {
  // engine
  OverlappingSpawns,
  InvalidMap,
  GameFinished,
  MalformedAction,
  NotOnRay,
  // procgen
  InvalidSpec,
  GenerationFailed,
  // observe
  OutOfCodebook,
  // neural
  ShapeMismatch,
  EmptyEntitySet,
  DuplicatePosition,
  EncodingMismatch,
  NoTape,
  BadMagic,
  VersionUnsupported,
  CrcMismatch,
  ShapeHeaderMismatch,
  // train / arena
  EmptyBatch,
  MissingCell,
  // config / io
  ConfigInvalid,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above so
/// callers (CLI exit codes, HTTP status mapping, tests) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  explicit Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lootcrawl
