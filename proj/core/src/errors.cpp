#include "voxtrack/errors.hpp"

namespace voxtrack {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::InvalidRay: return "InvalidRay";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InsufficientSurface: return "InsufficientSurface";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::TooFewVisible: return "TooFewVisible";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::ColdStartFailed: return "ColdStartFailed";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ObjectOutOfFrame: return "ObjectOutOfFrame";
    case ErrorCode::SpecParse: return "SpecParse";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace voxtrack
