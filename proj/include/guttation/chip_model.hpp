#pragma once

// Chip geometry, chemical reference scales, and their JSON configuration.
//
// Chip coordinates are millimetres with the origin at the top-left marker
// centre, x to the right and y downwards.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guttation/color.hpp"
#include "guttation/geometry.hpp"

namespace guttation {

enum class ChemicalKind { Acephate, Lead, Nitrate, Nitrite, PH, Hardness };

inline constexpr std::array<ChemicalKind, 6> kAllChemicals{
    ChemicalKind::Acephate, ChemicalKind::Lead, ChemicalKind::Nitrate,
    ChemicalKind::Nitrite,  ChemicalKind::PH,   ChemicalKind::Hardness};

enum class Quantization { Continuous, Ordinal };

Quantization quantization_of(ChemicalKind kind);
std::string_view to_string(ChemicalKind kind);
std::optional<ChemicalKind> chemical_from_string(std::string_view name);
inline std::size_t index_of(ChemicalKind kind) { return static_cast<std::size_t>(kind); }

inline constexpr int kKnotCount = 4;

struct Knot {
    Color color;
    double value = 0.0;
    std::string label;

    friend bool operator==(const Knot&, const Knot&) = default;
};

/// Four ordered (colour, concentration) knots for one chemical.
struct ReferenceScale {
    ChemicalKind chemical = ChemicalKind::Nitrate;
    std::array<Knot, kKnotCount> knots;
    std::string unit;

    double span() const { return knots.back().value - knots.front().value; }
    std::array<Color, kKnotCount> colors() const;
    std::array<double, kKnotCount> values() const;

    friend bool operator==(const ReferenceScale&, const ReferenceScale&) = default;
};

inline constexpr double kMinKnotColorSeparation = 0.02;

/// Empty when the scale satisfies its invariants.
std::vector<std::string> check_scale(const ReferenceScale& scale);

struct CircleShape {
    Point2 center;
    double radius = 0.0;
    friend bool operator==(const CircleShape&, const CircleShape&) = default;
};

/// Axis-aligned in chip coordinates; `corner` is the top-left corner.
struct RectShape {
    Point2 corner;
    double width = 0.0;
    double height = 0.0;
    friend bool operator==(const RectShape&, const RectShape&) = default;
};

struct PolygonShape {
    std::vector<Point2> vertices;
    friend bool operator==(const PolygonShape&, const PolygonShape&) = default;
};

using Shape = std::variant<CircleShape, RectShape, PolygonShape>;

Point2 centroid(const Shape& shape);
double area(const Shape& shape);
bool contains(const Shape& shape, Point2 p);
/// Axis-aligned bounds as {min, max}.
std::array<Point2, 2> bounds(const Shape& shape);
/// Scales the shape about its centroid by `factor` (linear).
Shape scaled(const Shape& shape, double factor);
/// Minimum distance between two shapes; 0 when they touch or overlap.
double clearance(const Shape& a, const Shape& b);
/// Polygon outline (circles are tessellated with `segments` vertices).
std::vector<Point2> outline(const Shape& shape, int segments = 64);

enum class RegionKind { TestCircle, ReferenceBar, Marker };
enum class MarkerTag { Triangle, Square, Circle };

std::string_view to_string(MarkerTag tag);
std::optional<MarkerTag> marker_tag_from_string(std::string_view name);

struct RegionSpec {
    std::string id;
    RegionKind kind = RegionKind::Marker;
    Shape shape;
    std::optional<ChemicalKind> chemical;
    std::optional<int> knotIndex;
    std::optional<MarkerTag> markerTag;

    friend bool operator==(const RegionSpec&, const RegionSpec&) = default;
};

struct Clearances {
    double circleToCircle = 0.5;
    double referenceToCircle = 0.3;
    double referenceToReference = 0.2;
    double markerToRegion = 0.5;
    friend bool operator==(const Clearances&, const Clearances&) = default;
};

struct ChipLayout {
    std::string id = "default";
    double chipWidth = 0.0;
    double chipHeight = 0.0;
    /// Chip-frame position of the physical chip's top-left corner.
    Point2 chipOrigin;
    Color substrateColor{0.96, 0.96, 0.95};
    std::vector<RegionSpec> markers;
    std::vector<RegionSpec> testCircles;
    std::vector<RegionSpec> referenceBars;
    Clearances clearances;
    /// Fields whose defaults are estimates rather than measured values.
    std::vector<std::string> estimates;

    /// Throws Error(ValidationError) when absent.
    const RegionSpec& test_circle(ChemicalKind kind) const;
    const RegionSpec& reference_bar(ChemicalKind kind, int knotIndex) const;
    std::vector<const RegionSpec*> all_regions() const;

    friend bool operator==(const ChipLayout&, const ChipLayout&) = default;
};

struct Violation {
    std::string code;
    std::string message;
    std::vector<std::string> regions;
    std::vector<double> measured;
};

std::vector<Violation> validate_layout(const ChipLayout& layout);

/// Parses the `layout` section (or a bare layout object) and validates it.
/// Throws Error(ParseError) with a line or field locus, or
/// Error(ValidationError) naming the first violated invariant.
ChipLayout load_layout(std::string_view configText);
std::string serialize_layout(const ChipLayout& layout);

/// Parses the `scales` section (or a bare array of scales).
std::vector<ReferenceScale> load_scales(std::string_view configText);
std::string serialize_scales(const std::vector<ReferenceScale>& scales);

const ReferenceScale& scale_for(const std::vector<ReferenceScale>& scales, ChemicalKind kind);

/// Shipped configuration document (data/default_chip.json).
std::string_view default_config_text();
ChipLayout default_layout();
std::vector<ReferenceScale> default_scales();

}  // namespace guttation
