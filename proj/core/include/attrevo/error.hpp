#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace attrevo {

enum class Errc {
  EmptyAttribute,
  MultilineAttribute,
  EmptySet,
  EmptyHistory,
  UnparsableCompletion,
  BackendUnavailable,
  MalformedResponse,
  EmptyDataset,
  EmptyGroup,
  PoolTooSmall,
  MissingClassTrajectory,
  ShapeMismatch,
  LabelOutOfRange,
  NotNormalized,
  InvalidConfig,
  InvalidArgument,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Every failure the library reports carries one of the codes above so the
// CLI can emit a machine-readable error.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace attrevo
