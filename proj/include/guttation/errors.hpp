#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace guttation {

enum class ErrorCode {
    ParseError,
    ValidationError,
    ImageDecodeError,
    InsufficientMarkers,
    AmbiguousAssignment,
    DegenerateGeometry,
    RegionOutOfImage,
    EmptyRegion,
    DegenerateColors,
    OutOfRange,
    UnknownChemical,
    UnknownDevice,
    PayloadTooLarge,
    UndecodableImage,
    InvalidRange,
    InvalidArgument,
    IoError,
    TransportError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Analysis stage a PipelineError originated in.
enum class Stage { Fiducials, Rectification, Sampling, Calibration };

std::string_view to_string(Stage stage);

class PipelineError : public Error {
public:
    PipelineError(Stage stage, const Error& cause)
        : Error(cause.code(), std::string(to_string(stage)) + ": " + cause.what()),
          stage_(stage) {}

    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

}  // namespace guttation
