#pragma once

// Synthetic chip photographs with known ground truth.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "guttation/chip_model.hpp"
#include "guttation/geometry.hpp"
#include "guttation/raster.hpp"

namespace guttation {

inline constexpr const char* kGeneratorVersion = "guttation-synth/1.0";

struct Warp {
    double rotationDeg = 0.0;
    double scale = 1.0;
    /// x += shear * y in chip coordinates before rotation.
    double shear = 0.0;
    Point2 translationPx;
};

/// Multiplicative ramp 1 + gradientX * u + gradientY * v with u, v in [-1, 1]
/// across the image.
struct Illumination {
    double gradientX = 0.0;
    double gradientY = 0.0;
};

struct TruthCase {
    /// nullopt marks an unreacted (dry) test circle.
    std::map<ChemicalKind, std::optional<double>> concentrations;
    Warp warp;
    double noiseSigma = 0.0;
    Illumination illumination;
    double resolution = 20.0;  // px per mm at warp scale 1
    std::uint64_t seed = 0;
};

struct SynthStyle {
    Color background{0.22, 0.42, 0.18};
    Color markerColor{0.08, 0.08, 0.08};
    Color dryColor{0.92, 0.92, 0.88};
    int supersample = 4;
    /// Canvas size relative to the chip's unwarped pixel size.
    double canvasFactor = 1.6;
};

/// Inverse of the knot map followed by the scale's interpolating cubic.
/// Throws Error(OutOfRange) outside [knot0, knot3].
Color color_for_concentration(const ReferenceScale& scale, double value);

std::array<int, 2> canvas_size(const ChipLayout& layout, const TruthCase& truth, const SynthStyle& style = {});
/// Ground-truth chip-mm -> pixel map used by render_chip.
AffineTransform truth_transform(const ChipLayout& layout, const TruthCase& truth, const SynthStyle& style = {});

Raster render_chip(const ChipLayout& layout, const std::vector<ReferenceScale>& scales, const TruthCase& truth,
                   const SynthStyle& style = {});

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct CorpusSpec {
    Range rotationDeg{-15.0, 15.0};
    Range scale{0.8, 1.2};
    Range shear{-0.05, 0.05};
    Range translationPx{-20.0, 20.0};
    Range noiseSigma{0.012, 0.012};
    /// Upper bound on |gradientX| + |gradientY|.
    double illuminationMax = 0.15;
    double resolution = 20.0;
    /// Probability that a case is an entirely unreacted chip.
    double dryFraction = 0.0;

    static CorpusSpec noiseless();
};

struct CorpusEntry {
    std::string imagePath;  // relative to the manifest directory
    TruthCase truth;
};

struct CorpusManifest {
    std::string generatorVersion = kGeneratorVersion;
    std::uint64_t seed = 0;
    CorpusSpec spec;
    std::vector<CorpusEntry> cases;
};

/// Latin-hypercube sample of `count` truth cases; deterministic in `seed`.
std::vector<TruthCase> sample_truth_cases(const CorpusSpec& spec, int count, std::uint64_t seed,
                                          const std::vector<ReferenceScale>& scales);

/// Renders every case to `outDir` as PNG and writes `outDir/manifest.json`.
CorpusManifest generate_corpus(const CorpusSpec& spec, int count, std::uint64_t seed,
                               const std::filesystem::path& outDir, const ChipLayout& layout,
                               const std::vector<ReferenceScale>& scales);

CorpusSpec parse_corpus_spec(std::string_view jsonText);
std::string serialize_corpus_spec(const CorpusSpec& spec);
std::string serialize_manifest(const CorpusManifest& manifest);
CorpusManifest parse_manifest(std::string_view jsonText);

}  // namespace guttation
