#pragma once

// Reading a reactant colour against four printed reference colours: a curve
// is fitted through the references in RGB space, the reactant is projected
// onto its closest point, and the curve parameter is mapped to a
// concentration through the knot values.

#include <array>
#include <optional>

#include "guttation/chip_model.hpp"
#include "guttation/color.hpp"

namespace guttation {

enum class CurveModel {
    /// Per-channel cubic through all four references (exact interpolation).
    Cubic,
    /// Per-channel least-squares quadratic, for noisy custom scales.
    QuadraticLeastSquares,
};

/// Curve parameter assigned to reference knot k.
inline constexpr double knot_parameter(int k) { return k / 3.0; }

struct CalibrationCurve {
    /// coefficients[channel][p] multiplies t^p.
    std::array<std::array<double, 4>, 3> coefficients{};
    CurveModel model = CurveModel::Cubic;
    std::optional<ChemicalKind> source;

    Color at(double t) const;
    Color derivative(double t) const;
};

struct Projection {
    double tStar = 0.0;
    double distance = 0.0;
};

struct CalibrationConfig {
    CurveModel model = CurveModel::Cubic;
    /// Dense samples over [0, 1] before refinement.
    int sampleCount = 1024;
    /// Golden-section bracket width at termination.
    double refineTolerance = 1e-9;
    /// Clamped projections farther than this from the end colour are extrapolations.
    double endpointEpsilon = 0.02;
    /// d0 in confidence = exp(-distance / d0).
    double confidenceScale = 0.05;
};

struct Measurement {
    ChemicalKind chemical = ChemicalKind::Nitrate;
    /// Concentration in scale units, or level index for ordinal scales.
    double value = 0.0;
    double tStar = 0.0;
    double curveDistance = 0.0;
    bool extrapolated = false;
    double confidence = 0.0;
};

/// Throws Error(DegenerateColors) when two references are closer than the
/// minimum knot separation.
CalibrationCurve fit_curve(const std::array<Color, 4>& referenceColors,
                           CurveModel model = CurveModel::Cubic);

/// Closest point on the curve over t in [0, 1]; ties go to the smaller t.
Projection project(const CalibrationCurve& curve, const Color& reactant,
                   const CalibrationConfig& config = {});

double concentration_at(const ReferenceScale& scale, double tStar);

Measurement quantify(const ReferenceScale& scale, const std::array<ColorSample, 4>& referenceSamples,
                     const ColorSample& reactant, const CalibrationConfig& config = {});

}  // namespace guttation
