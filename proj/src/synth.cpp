#include "guttation/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "guttation/calibration.hpp"
#include "guttation/errors.hpp"
#include "json_util.hpp"

namespace guttation {

using detail::Json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// mt19937_64 output is fully specified by the standard; the distributions are
// not, so uniform and normal variates are derived here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    template <class It>
    void shuffle(It first, It last) {
        for (auto n = last - first; n > 1; --n) {
            const auto j = static_cast<decltype(n)>(engine_() % static_cast<std::uint64_t>(n));
            std::iter_swap(first + (n - 1), first + j);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct FloatImage {
    int width;
    int height;
    std::vector<float> data;

    FloatImage(int w, int h, const Color& fill) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {
        for (std::size_t i = 0; i < data.size(); i += 3) {
            data[i] = static_cast<float>(fill.r);
            data[i + 1] = static_cast<float>(fill.g);
            data[i + 2] = static_cast<float>(fill.b);
        }
    }
    float* at(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
};

// Paints a convex shape with supersampled coverage blending.
void paint(FloatImage& img, const AffineTransform& chipToImage, const Shape& shape, const Color& color, int ss) {
    const AffineTransform toChip = chipToImage.inverse();
    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin, xmax = -xmin, ymax = -xmin;
    for (const auto& p : outline(shape, 96)) {
        const Point2 q = chipToImage.apply(p);
        xmin = std::min(xmin, q.x);
        xmax = std::max(xmax, q.x);
        ymin = std::min(ymin, q.y);
        ymax = std::max(ymax, q.y);
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(xmin)) - 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(ymin)) - 1);
    const int x1 = std::min(img.width, static_cast<int>(std::ceil(xmax)) + 1);
    const int y1 = std::min(img.height, static_cast<int>(std::ceil(ymax)) + 1);
    const double step = 1.0 / ss;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            int corners = 0;
            for (const Point2 c : {Point2{x + 0.0, y + 0.0}, Point2{x + 1.0, y + 0.0}, Point2{x + 0.0, y + 1.0},
                                   Point2{x + 1.0, y + 1.0}})
                corners += contains(shape, toChip.apply(c)) ? 1 : 0;
            double coverage;
            if (corners == 4) {
                coverage = 1.0;
            } else {
                int hits = 0;
                for (int j = 0; j < ss; ++j)
                    for (int i = 0; i < ss; ++i)
                        hits += contains(shape, toChip.apply({x + (i + 0.5) * step, y + (j + 0.5) * step})) ? 1 : 0;
                coverage = static_cast<double>(hits) / (ss * ss);
            }
            if (coverage <= 0.0) continue;
            float* px = img.at(x, y);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<float>((1.0 - coverage) * px[c] + coverage * color[c]);
        }
    }
}

Json range_json(const Range& r) { return Json::array({r.lo, r.hi}); }

Range range_at(const Json& j, const char* key, Range fallback) {
    if (!j.contains(key)) return fallback;
    const Json& v = j[key];
    const std::string path = std::string("spec.") + key;
    if (!v.is_array() || v.size() != 2) detail::field_error(path, "expected [lo, hi]");
    Range r{detail::number(v[0], path + "[0]"), detail::number(v[1], path + "[1]")};
    if (r.lo > r.hi) detail::field_error(path, "lo exceeds hi");
    return r;
}

Json spec_json(const CorpusSpec& s) {
    return {{"rotationDeg", range_json(s.rotationDeg)},
            {"scale", range_json(s.scale)},
            {"shear", range_json(s.shear)},
            {"translationPx", range_json(s.translationPx)},
            {"noiseSigma", range_json(s.noiseSigma)},
            {"illuminationMax", s.illuminationMax},
            {"resolution", s.resolution},
            {"dryFraction", s.dryFraction}};
}

CorpusSpec spec_from_json(const Json& j) {
    if (!j.is_object()) detail::field_error("spec", "expected an object");
    CorpusSpec d;
    CorpusSpec s;
    s.rotationDeg = range_at(j, "rotationDeg", d.rotationDeg);
    s.scale = range_at(j, "scale", d.scale);
    s.shear = range_at(j, "shear", d.shear);
    s.translationPx = range_at(j, "translationPx", d.translationPx);
    s.noiseSigma = range_at(j, "noiseSigma", d.noiseSigma);
    if (j.contains("illuminationMax")) s.illuminationMax = detail::number_at(j, "spec", "illuminationMax");
    if (j.contains("resolution")) s.resolution = detail::number_at(j, "spec", "resolution");
    if (j.contains("dryFraction")) s.dryFraction = detail::number_at(j, "spec", "dryFraction");

    auto require = [](bool ok, const char* field, const char* what) {
        if (!ok) throw Error(ErrorCode::ValidationError, std::string("spec.") + field + ": " + what);
    };
    require(s.scale.lo > 0.0, "scale", "must be positive");
    require(s.noiseSigma.lo >= 0.0 && s.noiseSigma.hi <= 1.0, "noiseSigma", "must lie in [0, 1]");
    require(s.illuminationMax >= 0.0 && s.illuminationMax <= 0.15, "illuminationMax", "must lie in [0, 0.15]");
    require(s.resolution >= 5.0, "resolution", "must be at least 5 px/mm");
    require(s.dryFraction >= 0.0 && s.dryFraction <= 1.0, "dryFraction", "must lie in [0, 1]");
    return s;
}

Json truth_json(const TruthCase& t) {
    Json conc = Json::object();
    for (const auto& [kind, value] : t.concentrations)
        conc[std::string(to_string(kind))] = value ? Json(*value) : Json(nullptr);
    return {{"concentrations", conc},
            {"warp",
             {{"rotationDeg", t.warp.rotationDeg},
              {"scale", t.warp.scale},
              {"shear", t.warp.shear},
              {"translationPx", detail::to_json(t.warp.translationPx)}}},
            {"noiseSigma", t.noiseSigma},
            {"illumination", {{"gradientX", t.illumination.gradientX}, {"gradientY", t.illumination.gradientY}}},
            {"resolution", t.resolution},
            {"seed", t.seed}};
}

TruthCase truth_from_json(const Json& j, const std::string& path) {
    TruthCase t;
    const Json& conc = detail::member(j, path, "concentrations");
    for (auto it = conc.begin(); it != conc.end(); ++it) {
        auto kind = chemical_from_string(it.key());
        if (!kind) detail::field_error(path + ".concentrations", "unknown chemical '" + it.key() + "'");
        t.concentrations[*kind] =
            it->is_null() ? std::nullopt : std::optional<double>(detail::number(*it, path + ".concentrations." + it.key()));
    }
    const Json& w = detail::member(j, path, "warp");
    t.warp.rotationDeg = detail::number_at(w, path + ".warp", "rotationDeg");
    t.warp.scale = detail::number_at(w, path + ".warp", "scale");
    t.warp.shear = detail::number_at(w, path + ".warp", "shear");
    t.warp.translationPx = detail::point(detail::member(w, path + ".warp", "translationPx"), path + ".warp.translationPx");
    t.noiseSigma = detail::number_at(j, path, "noiseSigma");
    const Json& il = detail::member(j, path, "illumination");
    t.illumination = {detail::number_at(il, path + ".illumination", "gradientX"),
                      detail::number_at(il, path + ".illumination", "gradientY")};
    t.resolution = detail::number_at(j, path, "resolution");
    const Json& seed = detail::member(j, path, "seed");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) detail::field_error(path + ".seed", "expected an integer");
    t.seed = seed.get<std::uint64_t>();
    return t;
}

}  // namespace

CorpusSpec CorpusSpec::noiseless() {
    CorpusSpec s;
    s.rotationDeg = {0.0, 0.0};
    s.scale = {1.0, 1.0};
    s.shear = {0.0, 0.0};
    s.translationPx = {0.0, 0.0};
    s.noiseSigma = {0.0, 0.0};
    s.illuminationMax = 0.0;
    return s;
}

Color color_for_concentration(const ReferenceScale& scale, double value) {
    const auto v = scale.values();
    const double tol = 1e-12 * std::max(1.0, std::abs(scale.span()));
    if (!(value >= v[0] - tol && value <= v[3] + tol))
        throw Error(ErrorCode::OutOfRange, std::to_string(value) + " outside the " +
                                               std::string(to_string(scale.chemical)) + " scale");
    value = std::clamp(value, v[0], v[3]);
    int k = 0;
    while (k < 2 && value > v[k + 1]) ++k;
    const double t = (k + (value - v[k]) / (v[k + 1] - v[k])) / 3.0;
    const Color c = fit_curve(scale.colors()).at(t);
    return {std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
}

std::array<int, 2> canvas_size(const ChipLayout& layout, const TruthCase& truth, const SynthStyle& style) {
    return {static_cast<int>(std::ceil(layout.chipWidth * truth.resolution * style.canvasFactor)),
            static_cast<int>(std::ceil(layout.chipHeight * truth.resolution * style.canvasFactor))};
}

AffineTransform truth_transform(const ChipLayout& layout, const TruthCase& truth, const SynthStyle& style) {
    const auto size = canvas_size(layout, truth, style);
    const double theta = truth.warp.rotationDeg * M_PI / 180.0;
    const double s = truth.resolution * truth.warp.scale;
    const double c = std::cos(theta), n = std::sin(theta);
    // s * R(theta) * [[1, shear], [0, 1]]
    const double a = s * c, b = s * (c * truth.warp.shear - n);
    const double d = s * n, e = s * (n * truth.warp.shear + c);
    const Point2 chip_center{layout.chipOrigin.x + 0.5 * layout.chipWidth, layout.chipOrigin.y + 0.5 * layout.chipHeight};
    const Point2 target{0.5 * size[0] + truth.warp.translationPx.x, 0.5 * size[1] + truth.warp.translationPx.y};
    return AffineTransform::from_rows(a, b, target.x - (a * chip_center.x + b * chip_center.y), d, e,
                                      target.y - (d * chip_center.x + e * chip_center.y));
}

Raster render_chip(const ChipLayout& layout, const std::vector<ReferenceScale>& scales, const TruthCase& truth,
                   const SynthStyle& style) {
    const auto size = canvas_size(layout, truth, style);
    const AffineTransform T = truth_transform(layout, truth, style);
    FloatImage img(size[0], size[1], style.background);
    const int ss = std::max(1, style.supersample);

    paint(img, T, RectShape{layout.chipOrigin, layout.chipWidth, layout.chipHeight}, layout.substrateColor, ss);
    for (const auto& m : layout.markers) paint(img, T, m.shape, style.markerColor, ss);
    for (const auto& b : layout.referenceBars)
        paint(img, T, b.shape, scale_for(scales, *b.chemical).knots[*b.knotIndex].color, ss);
    for (const auto& c : layout.testCircles) {
        Color color = style.dryColor;
        if (auto it = truth.concentrations.find(*c.chemical); it != truth.concentrations.end() && it->second)
            color = color_for_concentration(scale_for(scales, *c.chemical), *it->second);
        paint(img, T, c.shape, color, ss);
    }

    Rng rng(truth.seed);
    Raster out(size[0], size[1]);
    for (int y = 0; y < size[1]; ++y) {
        const double v = 2.0 * (y + 0.5) / size[1] - 1.0;
        for (int x = 0; x < size[0]; ++x) {
            const double u = 2.0 * (x + 0.5) / size[0] - 1.0;
            const double gain = 1.0 + truth.illumination.gradientX * u + truth.illumination.gradientY * v;
            const float* src = img.at(x, y);
            std::uint8_t* dst = out.at(x, y);
            for (int c = 0; c < 3; ++c) {
                double value = src[c] * gain;
                if (truth.noiseSigma > 0.0) value += truth.noiseSigma * rng.normal();
                dst[c] = to_byte(value);
            }
        }
    }
    return out;
}

std::vector<TruthCase> sample_truth_cases(const CorpusSpec& spec, int count, std::uint64_t seed,
                                          const std::vector<ReferenceScale>& scales) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "count must be at least 1");
    Rng rng(splitmix64(seed));

    // One stratified column per sampled dimension.
    constexpr int kDims = 8 + 6;
    std::vector<std::array<double, kDims>> unit(count);
    std::vector<int> strata(count);
    for (int d = 0; d < kDims; ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        rng.shuffle(strata.begin(), strata.end());
        for (int i = 0; i < count; ++i) unit[i][d] = (strata[i] + rng.uniform()) / count;
    }

    auto lerp = [](const Range& r, double u) { return r.lo + (r.hi - r.lo) * u; };
    std::vector<TruthCase> cases(count);
    for (int i = 0; i < count; ++i) {
        const auto& u = unit[i];
        TruthCase& t = cases[i];
        t.warp.rotationDeg = lerp(spec.rotationDeg, u[0]);
        t.warp.scale = lerp(spec.scale, u[1]);
        t.warp.shear = lerp(spec.shear, u[2]);
        t.warp.translationPx = {lerp(spec.translationPx, u[3]), lerp(spec.translationPx, u[4])};
        t.noiseSigma = lerp(spec.noiseSigma, u[5]);
        const double amplitude = spec.illuminationMax * u[6];
        const double angle = 2.0 * M_PI * u[7];
        const double norm1 = std::abs(std::cos(angle)) + std::abs(std::sin(angle));
        t.illumination = {amplitude * std::cos(angle) / norm1, amplitude * std::sin(angle) / norm1};
        t.resolution = spec.resolution;
        t.seed = splitmix64(seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(i + 1)));
        const bool dry = rng.uniform() < spec.dryFraction;
        for (std::size_t k = 0; k < kAllChemicals.size(); ++k) {
            const ChemicalKind kind = kAllChemicals[k];
            if (dry) {
                t.concentrations[kind] = std::nullopt;
                continue;
            }
            const ReferenceScale& scale = scale_for(scales, kind);
            const double uk = u[8 + k];
            if (quantization_of(kind) == Quantization::Ordinal)
                t.concentrations[kind] = scale.knots[std::min(3, static_cast<int>(uk * 4.0))].value;
            else
                t.concentrations[kind] = scale.knots[0].value + uk * scale.span();
        }
    }
    return cases;
}

CorpusManifest generate_corpus(const CorpusSpec& spec, int count, std::uint64_t seed,
                               const std::filesystem::path& outDir, const ChipLayout& layout,
                               const std::vector<ReferenceScale>& scales) {
    CorpusManifest manifest;
    manifest.seed = seed;
    manifest.spec = spec;
    const auto cases = sample_truth_cases(spec, count, seed, scales);
    std::error_code ec;
    std::filesystem::create_directories(outDir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + outDir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < cases.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "case_%04zu.png", i);
        write_png(outDir / name, render_chip(layout, scales, cases[i]));
        manifest.cases.push_back({name, cases[i]});
    }
    std::ofstream out(outDir / "manifest.json", std::ios::trunc);
    out << serialize_manifest(manifest) << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + outDir.string());
    return manifest;
}

CorpusSpec parse_corpus_spec(std::string_view jsonText) {
    return spec_from_json(detail::parse_document(jsonText, "corpus spec"));
}

std::string serialize_corpus_spec(const CorpusSpec& spec) { return spec_json(spec).dump(2); }

std::string serialize_manifest(const CorpusManifest& manifest) {
    Json cases = Json::array();
    for (const auto& c : manifest.cases) cases.push_back({{"image", c.imagePath}, {"truth", truth_json(c.truth)}});
    return Json{{"generatorVersion", manifest.generatorVersion},
                {"seed", manifest.seed},
                {"count", manifest.cases.size()},
                {"spec", spec_json(manifest.spec)},
                {"cases", cases}}
        .dump(2);
}

CorpusManifest parse_manifest(std::string_view jsonText) {
    const Json j = detail::parse_document(jsonText, "manifest");
    CorpusManifest m;
    m.generatorVersion = detail::text_at(j, "manifest", "generatorVersion");
    m.seed = detail::member(j, "manifest", "seed").get<std::uint64_t>();
    m.spec = spec_from_json(detail::member(j, "manifest", "spec"));
    const Json& cases = detail::member(j, "manifest", "cases");
    if (!cases.is_array()) detail::field_error("manifest.cases", "expected an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string path = "manifest.cases[" + std::to_string(i) + "]";
        m.cases.push_back({detail::text_at(cases[i], path, "image"),
                           truth_from_json(detail::member(cases[i], path, "truth"), path + ".truth")});
    }
    return m;
}

}  // namespace guttation
