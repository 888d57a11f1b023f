#include "guttation/errors.hpp"

namespace guttation {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::ImageDecodeError: return "ImageDecodeError";
        case ErrorCode::InsufficientMarkers: return "InsufficientMarkers";
        case ErrorCode::AmbiguousAssignment: return "AmbiguousAssignment";
        case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
        case ErrorCode::RegionOutOfImage: return "RegionOutOfImage";
        case ErrorCode::EmptyRegion: return "EmptyRegion";
        case ErrorCode::DegenerateColors: return "DegenerateColors";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::UnknownChemical: return "UnknownChemical";
        case ErrorCode::UnknownDevice: return "UnknownDevice";
        case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorCode::UndecodableImage: return "UndecodableImage";
        case ErrorCode::InvalidRange: return "InvalidRange";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::TransportError: return "TransportError";
    }
    return "Unknown";
}

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::Fiducials: return "fiducials";
        case Stage::Rectification: return "rectification";
        case Stage::Sampling: return "sampling";
        case Stage::Calibration: return "calibration";
    }
    return "unknown";
}

}  // namespace guttation
