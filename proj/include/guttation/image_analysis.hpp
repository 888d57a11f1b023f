#pragma once

// Locating the chip in a photograph and reading colours off it.
//
// detect_fiducials -> estimate_rectification -> sample_color (per region)
// -> quantify (calibration) -> assess_validity, composed by analyze().

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guttation/calibration.hpp"
#include "guttation/chip_model.hpp"
#include "guttation/errors.hpp"
#include "guttation/geometry.hpp"
#include "guttation/raster.hpp"

namespace guttation {

struct MarkerDetection {
    MarkerTag shapeTag = MarkerTag::Circle;
    /// Continuous pixel coordinates; pixel (i, j) covers [i, i+1) x [j, j+1).
    Point2 centroid;
    double score = 0.0;
    double areaPx = 0.0;
};

struct DetectionConfig {
    double nominalPxPerMm = 20.0;
    /// Accepted rectification scale relative to nominal.
    double minScale = 0.25;
    double maxScale = 4.0;
    /// Diameter used to size the adaptive-threshold window.
    double markerDiameterMm = 3.0;
    double polygonEpsilonFraction = 0.02;
    double squareSideRatioMin = 0.8;
    double squareSideRatioMax = 1.25;
    double circleMinIsoperimetric = 0.85;
    /// Adaptive threshold offset below the local mean, in [0, 1] luminance.
    double thresholdOffset = 0.15;
    double minScore = 0.3;
    double minAreaPx = 30.0;
};

struct Rectification {
    /// Chip millimetres -> image pixels.
    AffineTransform chipToImage;
    double residualPx = 0.0;
    /// Layout marker id -> detection it was matched to.
    std::vector<std::pair<std::string, MarkerDetection>> assignments;
};

struct SamplingConfig {
    /// Circles are sampled within this fraction of their radius.
    double circleRadiusFraction = 0.5;
    /// Bars and markers are sampled over this fraction of their area.
    double barAreaFraction = 0.6;
};

enum class ReadingStatus { Reacted, Unreacted, Partial, Unreadable };

std::string_view to_string(ReadingStatus status);

struct ValidityConfig {
    Color dryColor{0.92, 0.92, 0.88};
    double dryEpsilon = 0.03;
    double maxBarDispersion = 0.2;
};

struct ValidityAssessment {
    ReadingStatus status = ReadingStatus::Unreadable;
    std::map<ChemicalKind, bool> perChemical;
    std::vector<std::string> notes;
};

using BarSamples = std::map<std::pair<ChemicalKind, int>, ColorSample>;

struct AnalysisConfig {
    DetectionConfig detection;
    SamplingConfig sampling;
    ValidityConfig validity;
    CalibrationConfig calibration;
};

struct ChipReading {
    ValidityAssessment validity;
    /// Only chemicals marked usable carry a measurement.
    std::vector<Measurement> measurements;
    Rectification rectification;
    std::map<ChemicalKind, ColorSample> circleSamples;

    const Measurement* measurement(ChemicalKind kind) const;
};

/// Candidate corner shapes sorted by score, best first. Throws
/// Error(ImageDecodeError) for images smaller than 64x64.
std::vector<MarkerDetection> detect_fiducials(const Raster& image, const DetectionConfig& config = {});

/// Least-squares affine fit from layout marker centres to detections.
/// Throws Error with InsufficientMarkers, AmbiguousAssignment or DegenerateGeometry.
Rectification estimate_rectification(const std::vector<MarkerDetection>& markers, const ChipLayout& layout,
                                     const DetectionConfig& config = {});

/// Channelwise median and standard deviation over the region's central part.
/// Throws Error with RegionOutOfImage or EmptyRegion.
ColorSample sample_color(const Raster& image, const AffineTransform& chipToImage, const RegionSpec& region,
                         const SamplingConfig& config = {});

/// `substrateSamples`, when given, holds bare-substrate colour next to each
/// test circle and is used to correct the dry reference for local lighting.
ValidityAssessment assess_validity(const std::map<ChemicalKind, ColorSample>& circleSamples,
                                   const BarSamples& barSamples, const ChipLayout& layout,
                                   const ValidityConfig& config = {},
                                   const std::map<ChemicalKind, ColorSample>* substrateSamples = nullptr);

/// Full pipeline. Throws PipelineError naming the failing stage.
ChipReading analyze(const Raster& image, const ChipLayout& layout, const std::vector<ReferenceScale>& scales,
                    const AnalysisConfig& config = {});

}  // namespace guttation
