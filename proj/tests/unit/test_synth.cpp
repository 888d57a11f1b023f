#include <fstream>
#include <sstream>

#include "guttation/calibration.hpp"
#include "guttation/image_analysis.hpp"
#include "guttation/relay.hpp"
#include "guttation/synth.hpp"
#include "support.hpp"

using namespace guttation;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("knot values render as knot colours") {
    for (const auto& s : default_scales())
        for (const auto& k : s.knots) CHECK(distance(color_for_concentration(s, k.value), k.color) < 1e-9);
}

TEST_CASE("nitrate 3 ppm sits at the curve midpoint") {
    const auto& nitrate = scale_for(default_scales(), ChemicalKind::Nitrate);
    const Color expected = fit_curve(nitrate.colors()).at(0.5);
    CHECK(distance(color_for_concentration(nitrate, 3.0), expected) < 1e-12);
}

TEST_CASE("values outside the knot range are rejected") {
    const auto& nitrate = scale_for(default_scales(), ChemicalKind::Nitrate);
    CHECK(testing::error_code_of([&] { color_for_concentration(nitrate, 10.5); }) == ErrorCode::OutOfRange);
    CHECK(testing::error_code_of([&] { color_for_concentration(nitrate, -0.1); }) == ErrorCode::OutOfRange);
}

TEST_CASE("quantify inverts color_for_concentration") {
    for (const auto& s : default_scales()) {
        if (quantization_of(s.chemical) == Quantization::Ordinal) continue;
        std::array<ColorSample, 4> refs;
        for (int k = 0; k < 4; ++k) refs[k] = ColorSample::flat(s.knots[k].color, 100);
        for (int i = 0; i <= 50; ++i) {
            const double v = s.knots[0].value + s.span() * i / 50.0;
            const auto m = quantify(s, refs, ColorSample::flat(color_for_concentration(s, v)));
            CHECK(std::abs(m.value - v) <= 1e-6 * s.span());
        }
    }
}

TEST_CASE("nitrate at 10 ppm round-trips through a render") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    TruthCase truth;
    for (const auto& s : scales) truth.concentrations[s.chemical] = s.knots[0].value;
    truth.concentrations[ChemicalKind::Nitrate] = 10.0;
    const auto reading = analyze(render_chip(layout, scales, truth), layout, scales);
    const auto* m = reading.measurement(ChemicalKind::Nitrate);
    REQUIRE(m);
    CHECK(std::abs(m->value - 10.0) <= 0.01 * 10.0);
}

TEST_CASE("renders are deterministic in the seed") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    const auto cases = sample_truth_cases(CorpusSpec{}, 2, 42, scales);
    CHECK(render_chip(layout, scales, cases[0]) == render_chip(layout, scales, cases[0]));
    CHECK_FALSE(render_chip(layout, scales, cases[0]) == render_chip(layout, scales, cases[1]));
}

TEST_CASE("sampled cases respect the corpus ranges") {
    CorpusSpec spec;
    const auto cases = sample_truth_cases(spec, 200, 7, default_scales());
    REQUIRE(cases.size() == 200);
    for (const auto& c : cases) {
        CHECK(c.warp.rotationDeg >= -15.0);
        CHECK(c.warp.rotationDeg <= 15.0);
        CHECK(c.warp.scale >= 0.8);
        CHECK(c.warp.scale <= 1.2);
        CHECK(std::abs(c.warp.shear) <= 0.05);
        CHECK(std::abs(c.illumination.gradientX) + std::abs(c.illumination.gradientY) <= 0.15 + 1e-12);
    }
    CHECK(testing::error_code_of([&] { sample_truth_cases(spec, 0, 7, default_scales()); }) ==
          ErrorCode::InvalidArgument);
}

TEST_CASE("corpus generation is reproducible") {
    testing::TempDir a("corpus-a"), b("corpus-b");
    const auto layout = default_layout();
    const auto scales = default_scales();
    generate_corpus(CorpusSpec{}, 5, 7, a.path(), layout, scales);
    generate_corpus(CorpusSpec{}, 5, 7, b.path(), layout, scales);
    const std::string ma = slurp(a.path() / "manifest.json");
    CHECK(ma == slurp(b.path() / "manifest.json"));
    CHECK(sha256_hex(slurp(a.path() / "case_0003.png")) == sha256_hex(slurp(b.path() / "case_0003.png")));

    const auto manifest = parse_manifest(ma);
    CHECK(manifest.cases.size() == 5);
    CHECK(manifest.generatorVersion == kGeneratorVersion);
    CHECK(serialize_manifest(manifest) + "\n" == ma);
}

TEST_CASE("corpus spec JSON round-trips and validates") {
    CorpusSpec spec;
    spec.dryFraction = 0.25;
    spec.rotationDeg = {-5, 5};
    const auto back = parse_corpus_spec(serialize_corpus_spec(spec));
    CHECK(back.dryFraction == 0.25);
    CHECK(back.rotationDeg.hi == 5.0);
    CHECK(testing::error_code_of([] { parse_corpus_spec(R"({"scale": [2, 1]})"); }) == ErrorCode::ParseError);
    CHECK(testing::error_code_of([] { parse_corpus_spec(R"({"dryFraction": 2})"); }) == ErrorCode::ValidationError);
}
