#include <random>

#include "guttation/image_analysis.hpp"
#include "guttation/report_json.hpp"
#include "guttation/synth.hpp"
#include "support.hpp"

using namespace guttation;

namespace {

TruthCase reacted_truth(double knotFraction = 0.4) {
    TruthCase truth;
    for (const auto& s : default_scales()) {
        double v = s.knots[0].value + knotFraction * s.span();
        if (quantization_of(s.chemical) == Quantization::Ordinal) v = std::round(v);
        truth.concentrations[s.chemical] = v;
    }
    return truth;
}

double value_error(const ChipReading& reading, const TruthCase& truth, ChemicalKind kind) {
    const auto* m = reading.measurement(kind);
    REQUIRE(m);
    return std::abs(m->value - *truth.concentrations.at(kind)) / scale_for(default_scales(), kind).span();
}

Raster flat_image(int w, int h, const Color& c) {
    Raster r(w, h);
    r.fill(c);
    return r;
}

const AffineTransform kTwentyPxPerMm = AffineTransform::from_rows(20, 0, 40, 0, 20, 40);

}  // namespace

TEST_CASE("uniform gray image has no fiducials") {
    CHECK(detect_fiducials(flat_image(400, 300, {0.5, 0.5, 0.5})).empty());
}

TEST_CASE("tiny images are rejected") {
    CHECK(testing::error_code_of([] { detect_fiducials(flat_image(32, 32, {0.5, 0.5, 0.5})); }) ==
          ErrorCode::ImageDecodeError);
}

TEST_CASE("fiducials of an unwarped render sit on the true marker centres") {
    const auto layout = default_layout();
    const auto truth = reacted_truth();
    const auto image = render_chip(layout, default_scales(), truth);
    const auto T = truth_transform(layout, truth);
    const auto found = detect_fiducials(image);
    for (const auto& marker : layout.markers) {
        const Point2 expected = T.apply(centroid(marker.shape));
        bool hit = false;
        for (const auto& d : found)
            hit = hit || (d.shapeTag == *marker.markerTag && norm(d.centroid - expected) <= 2.0);
        CHECK_MESSAGE(hit, marker.id);
    }
}

TEST_CASE("shape tags survive a 10 degree rotation") {
    const auto layout = default_layout();
    auto truth = reacted_truth();
    truth.warp.rotationDeg = 10.0;
    const auto image = render_chip(layout, default_scales(), truth);
    const auto T = truth_transform(layout, truth);
    const auto found = detect_fiducials(image);
    for (const auto& marker : layout.markers) {
        const Point2 expected = T.apply(centroid(marker.shape));
        bool hit = false;
        for (const auto& d : found)
            hit = hit || (d.shapeTag == *marker.markerTag && norm(d.centroid - expected) <= 2.0);
        CHECK_MESSAGE(hit, marker.id);
    }
}

TEST_CASE("identity render rectifies to a pure scale") {
    const auto layout = default_layout();
    const auto truth = reacted_truth();
    const auto image = render_chip(layout, default_scales(), truth);
    const auto rect = estimate_rectification(detect_fiducials(image), layout);
    const auto& m = rect.chipToImage.m;
    CHECK(m[0][0] == doctest::Approx(20.0).epsilon(0.01));
    CHECK(m[1][1] == doctest::Approx(20.0).epsilon(0.01));
    CHECK(std::abs(m[0][1]) < 0.2);
    CHECK(std::abs(m[1][0]) < 0.2);
    CHECK(rect.residualPx < 0.5);
}

TEST_CASE("a known warp is recovered within 1 percent") {
    const auto layout = default_layout();
    auto truth = reacted_truth();
    truth.warp = {12.0, 1.1, 0.04, {15.0, -10.0}};
    const auto image = render_chip(layout, default_scales(), truth);
    const auto expected = truth_transform(layout, truth);
    const auto rect = estimate_rectification(detect_fiducials(image), layout);
    const double tol = 0.01 * std::sqrt(expected.determinant());
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) CHECK(std::abs(rect.chipToImage.m[i][j] - expected.m[i][j]) <= tol);
        CHECK(std::abs(rect.chipToImage.m[i][2] - expected.m[i][2]) <= 0.01 * std::abs(expected.m[i][2]));
    }
    CHECK(rect.residualPx < 1.0);
}

TEST_CASE("collinear detections are degenerate") {
    std::vector<MarkerDetection> markers{{MarkerTag::Triangle, {100, 100}, 1.0, 800},
                                         {MarkerTag::Square, {400, 100}, 1.0, 2700},
                                         {MarkerTag::Circle, {700, 100}, 1.0, 2400}};
    CHECK(testing::error_code_of([&] { estimate_rectification(markers, default_layout()); }) ==
          ErrorCode::DegenerateGeometry);
}

TEST_CASE("two detections are insufficient") {
    std::vector<MarkerDetection> markers{{MarkerTag::Triangle, {100, 100}, 1.0, 800},
                                         {MarkerTag::Square, {740, 100}, 1.0, 2700}};
    CHECK(testing::error_code_of([&] { estimate_rectification(markers, default_layout()); }) ==
          ErrorCode::InsufficientMarkers);
}

TEST_CASE("sampling a flat patch") {
    const auto layout = default_layout();
    const auto image = flat_image(900, 700, {0.2, 0.4, 0.6});
    const auto s = sample_color(image, kTwentyPxPerMm, layout.test_circle(ChemicalKind::Nitrate));
    CHECK(s.mean.r == doctest::Approx(0.2));
    CHECK(s.mean.g == doctest::Approx(0.4));
    CHECK(s.mean.b == doctest::Approx(0.6));
    CHECK(s.dispersion.r < 1e-9);
    CHECK(s.pixelCount >= 100);
}

TEST_CASE("sampling a noisy patch stays within 0.01") {
    const auto layout = default_layout();
    Raster image = flat_image(900, 700, {0.2, 0.4, 0.6});
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.02);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            auto* p = image.at(x, y);
            const Color c = image.color(x, y);
            p[0] = to_byte(c.r + noise(rng));
            p[1] = to_byte(c.g + noise(rng));
            p[2] = to_byte(c.b + noise(rng));
        }
    for (const auto& region : layout.all_regions()) {
        if (region->kind == RegionKind::Marker) continue;
        const auto s = sample_color(image, kTwentyPxPerMm, *region);
        CHECK(std::abs(s.mean.r - 0.2) < 0.01);
        CHECK(std::abs(s.mean.g - 0.4) < 0.01);
        CHECK(std::abs(s.mean.b - 0.6) < 0.01);
    }
}

TEST_CASE("sampling follows uniform brightness shifts") {
    const auto layout = default_layout();
    Raster image(900, 700);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> v(60, 160);
    for (auto& p : image.pixels) p = static_cast<std::uint8_t>(v(rng));
    Raster brighter = image;
    for (auto& p : brighter.pixels) p = static_cast<std::uint8_t>(p + 20);
    const auto& region = layout.test_circle(ChemicalKind::PH);
    const auto a = sample_color(image, kTwentyPxPerMm, region);
    const auto b = sample_color(brighter, kTwentyPxPerMm, region);
    for (int ch = 0; ch < 3; ++ch) CHECK(b.mean[ch] - a.mean[ch] == doctest::Approx(20.0 / 255.0).epsilon(1e-6));
}

TEST_CASE("regions outside the image or too small are errors") {
    const auto layout = default_layout();
    const auto image = flat_image(900, 700, {0.2, 0.4, 0.6});
    const auto& circle = layout.test_circle(ChemicalKind::Acephate);
    const auto c = std::get<CircleShape>(circle.shape).center;
    // Put the circle centre on the left image edge.
    const auto shifted = AffineTransform::from_rows(20, 0, -20 * c.x, 0, 20, 40);
    CHECK(testing::error_code_of([&] { sample_color(image, shifted, circle); }) == ErrorCode::RegionOutOfImage);
    const auto tiny = AffineTransform::from_rows(0.5, 0, 40, 0, 0.5, 40);
    CHECK(testing::error_code_of([&] { sample_color(image, tiny, circle); }) == ErrorCode::EmptyRegion);
}

TEST_CASE("validity classification") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    BarSamples bars;
    for (const auto& s : scales)
        for (int k = 0; k < 4; ++k) bars[{s.chemical, k}] = ColorSample::flat(s.knots[k].color, 200);

    std::map<ChemicalKind, ColorSample> dry, reacted;
    for (const auto& s : scales) {
        dry[s.chemical] = ColorSample::flat({0.92, 0.92, 0.88}, 300);
        reacted[s.chemical] = ColorSample::flat(s.knots[1].color, 300);
    }

    const auto unreacted = assess_validity(dry, bars, layout);
    CHECK(unreacted.status == ReadingStatus::Unreacted);
    for (const auto& [kind, usable] : unreacted.perChemical) CHECK_FALSE(usable);

    CHECK(assess_validity(reacted, bars, layout).status == ReadingStatus::Reacted);

    auto mixed = reacted;
    mixed[ChemicalKind::Lead] = dry[ChemicalKind::Lead];
    const auto partial = assess_validity(mixed, bars, layout);
    CHECK(partial.status == ReadingStatus::Partial);
    CHECK_FALSE(partial.perChemical.at(ChemicalKind::Lead));

    auto washed = bars;
    for (auto& [key, sample] : washed) sample.dispersion = {0.25, 0.25, 0.25};
    CHECK(assess_validity(reacted, washed, layout).status == ReadingStatus::Unreadable);
}

TEST_CASE("noiseless round trip within 1 percent of span") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    const auto truth = reacted_truth(0.55);
    const auto reading = analyze(render_chip(layout, scales, truth), layout, scales);
    CHECK(reading.validity.status == ReadingStatus::Reacted);
    REQUIRE(reading.measurements.size() == 6);
    for (auto kind : kAllChemicals) CHECK(value_error(reading, truth, kind) <= 0.01);
    CHECK(reading.rectification.residualPx < 1.0);
}

TEST_CASE("perturbed round trip within 5 percent of span") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    auto truth = reacted_truth(0.3);
    truth.warp.rotationDeg = 15.0;
    truth.warp.scale = 0.9;
    truth.noiseSigma = 0.012;
    truth.seed = 99;
    const auto reading = analyze(render_chip(layout, scales, truth), layout, scales);
    for (auto kind : kAllChemicals) CHECK(value_error(reading, truth, kind) <= 0.05);
}

TEST_CASE("affine warps do not change the reading") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    auto truth = reacted_truth(0.7);
    const auto flat = analyze(render_chip(layout, scales, truth), layout, scales);
    for (const Warp w : {Warp{-14.0, 0.85, 0.0, {}}, Warp{7.0, 1.2, -0.05, {10, 5}}, Warp{3.0, 1.0, 0.05, {-20, 20}}}) {
        truth.warp = w;
        const auto warped = analyze(render_chip(layout, scales, truth), layout, scales);
        for (auto kind : kAllChemicals) {
            const double d = std::abs(warped.measurement(kind)->value - flat.measurement(kind)->value);
            CHECK(d <= 0.01 * scale_for(scales, kind).span());
        }
    }
}

TEST_CASE("identical bytes give identical readings") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    auto truth = reacted_truth(0.2);
    truth.warp.rotationDeg = -8;
    truth.noiseSigma = 0.012;
    truth.seed = 3;
    const auto image = render_chip(layout, scales, truth);
    CHECK(reading_json(analyze(image, layout, scales)) == reading_json(analyze(image, layout, scales)));
}

TEST_CASE("a photo without a chip fails at the fiducial stage") {
    Raster leaf = flat_image(800, 600, {0.22, 0.42, 0.18});
    try {
        analyze(leaf, default_layout(), default_scales());
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK(e.stage() == Stage::Fiducials);
        CHECK(e.code() == ErrorCode::InsufficientMarkers);
    }
}

TEST_CASE("a fully unreacted render reads as Unreacted") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    TruthCase truth;
    for (auto kind : kAllChemicals) truth.concentrations[kind] = std::nullopt;
    const auto reading = analyze(render_chip(layout, scales, truth), layout, scales);
    CHECK(reading.validity.status == ReadingStatus::Unreacted);
    CHECK(reading.measurements.empty());
}

TEST_CASE("JPEG re-encodes are still readable") {
    const auto layout = default_layout();
    const auto scales = default_scales();
    const auto truth = reacted_truth(0.45);
    const auto jpeg = encode_jpeg(render_chip(layout, scales, truth), 90);
    const auto reading = analyze(decode_image(jpeg), layout, scales);
    for (auto kind : kAllChemicals) CHECK(value_error(reading, truth, kind) <= 0.05);
}
