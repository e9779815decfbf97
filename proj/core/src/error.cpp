#include "attrevo/error.hpp"

namespace attrevo {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyAttribute: return "EmptyAttribute";
    case Errc::MultilineAttribute: return "MultilineAttribute";
    case Errc::EmptySet: return "EmptySet";
    case Errc::EmptyHistory: return "EmptyHistory";
    case Errc::UnparsableCompletion: return "UnparsableCompletion";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::MalformedResponse: return "MalformedResponse";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::MissingClassTrajectory: return "MissingClassTrajectory";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace attrevo
