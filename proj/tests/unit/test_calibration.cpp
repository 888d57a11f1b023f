#include <random>

#include "guttation/calibration.hpp"
#include "support.hpp"

using namespace guttation;

namespace {

std::array<ColorSample, 4> flat_refs(const std::array<Color, 4>& cs) {
    return {ColorSample::flat(cs[0], 100), ColorSample::flat(cs[1], 100), ColorSample::flat(cs[2], 100),
            ColorSample::flat(cs[3], 100)};
}

// Closest grid point over n+1 equally spaced parameters.
Projection brute_force(const CalibrationCurve& curve, const Color& c, int n) {
    Projection best{0.0, distance(curve.at(0.0), c)};
    for (int i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double d = distance(curve.at(t), c);
        if (d < best.distance) best = {t, d};
    }
    return best;
}

Color random_color(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("collinear equally spaced colours give an affine curve") {
    const std::array<Color, 4> cs{Color{0.1, 0.2, 0.3}, Color{0.3, 0.3, 0.4}, Color{0.5, 0.4, 0.5},
                                  Color{0.7, 0.5, 0.6}};
    const auto curve = fit_curve(cs);
    for (int ch = 0; ch < 3; ++ch) {
        CHECK(std::abs(curve.coefficients[ch][2]) < 1e-9);
        CHECK(std::abs(curve.coefficients[ch][3]) < 1e-9);
    }
}

TEST_CASE("the cubic interpolates every knot") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<Color, 4> cs;
        for (auto& c : cs) c = random_color(rng);
        CalibrationCurve curve;
        try {
            curve = fit_curve(cs);
        } catch (const Error&) {
            continue;  // rare degenerate draw
        }
        for (int k = 0; k < 4; ++k) CHECK(distance(curve.at(knot_parameter(k)), cs[k]) < 1e-9);
    }
}

TEST_CASE("near-identical references are degenerate") {
    const std::array<Color, 4> cs{Color{0.1, 0.1, 0.1}, Color{0.11, 0.1, 0.1}, Color{0.5, 0.5, 0.5},
                                  Color{0.9, 0.9, 0.9}};
    CHECK(testing::error_code_of([&] { fit_curve(cs); }) == ErrorCode::DegenerateColors);
}

TEST_CASE("default nitrate scale has monotone luminance along the curve") {
    const auto curve = fit_curve(scale_for(default_scales(), ChemicalKind::Nitrate).colors());
    double previous = luminance(curve.at(0.0));
    for (int i = 1; i <= 10000; ++i) {
        const double now = luminance(curve.at(i / 10000.0));
        REQUIRE(now <= previous + 1e-12);
        previous = now;
    }
}

TEST_CASE("projection of knots, orthogonal offsets and clamped tails") {
    const auto& scale = scale_for(default_scales(), ChemicalKind::Nitrate);
    const auto curve = fit_curve(scale.colors());
    for (int k = 0; k < 4; ++k) {
        const auto p = project(curve, scale.knots[k].color);
        CHECK(std::abs(p.tStar - knot_parameter(k)) < 1e-4);
        CHECK(p.distance < 1e-9);
    }

    // Small offset orthogonal to the tangent at t = 0.5.
    const Color mid = curve.at(0.5), tangent = curve.derivative(0.5);
    Color normal{tangent.g, -tangent.r, 0.0};
    const double n = std::sqrt(normal.r * normal.r + normal.g * normal.g);
    const Color offset{mid.r + 0.01 * normal.r / n, mid.g + 0.01 * normal.g / n, mid.b};
    const auto p = project(curve, offset);
    CHECK(std::abs(p.tStar - 0.5) < 1e-3);
    CHECK(std::abs(p.tStar - brute_force(curve, offset, 1000000).tStar) < 1e-3);

    // Far past knot 3 along the end tangent.
    const Color end = curve.at(1.0), d1 = curve.derivative(1.0);
    const auto tail = project(curve, {end.r + 0.3 * d1.r, end.g + 0.3 * d1.g, end.b + 0.3 * d1.b});
    CHECK(tail.tStar == 1.0);
    CHECK(tail.distance > 0.0);
}

TEST_CASE("projection matches a dense brute-force grid") {
    std::mt19937_64 rng(2024);
    int checked = 0;
    while (checked < 200) {
        std::array<Color, 4> cs;
        for (auto& c : cs) c = random_color(rng);
        CalibrationCurve curve;
        try {
            curve = fit_curve(cs);
        } catch (const Error&) {
            continue;
        }
        const Color reactant = random_color(rng);
        const auto refined = project(curve, reactant);
        CHECK(refined.distance <= brute_force(curve, reactant, 1000000).distance + 1e-6);
        ++checked;
    }
}

TEST_CASE("concentration_at interpolates piecewise linearly") {
    const auto scales = default_scales();
    CHECK(concentration_at(scale_for(scales, ChemicalKind::Nitrate), 1.0 / 3.0) == doctest::Approx(1.0));
    CHECK(concentration_at(scale_for(scales, ChemicalKind::PH), 0.5) == doctest::Approx(6.5));
    CHECK(concentration_at(scale_for(scales, ChemicalKind::Acephate), 0.6) == 2.0);
    CHECK(concentration_at(scale_for(scales, ChemicalKind::Nitrate), 0.0) == 0.0);
    CHECK(concentration_at(scale_for(scales, ChemicalKind::Nitrate), 1.0) == 10.0);
}

TEST_CASE("quantify examples") {
    const auto scales = default_scales();
    const auto& nitrate = scale_for(scales, ChemicalKind::Nitrate);
    const auto refs = flat_refs(nitrate.colors());

    const auto knot2 = quantify(nitrate, refs, ColorSample::flat(nitrate.knots[2].color));
    CHECK(knot2.value == doctest::Approx(5.0));
    CHECK(knot2.confidence > 0.99);
    CHECK_FALSE(knot2.extrapolated);

    // Collinear scale: the colour midway between knots 1 and 2 reads midway in value.
    ReferenceScale line = nitrate;
    for (int k = 0; k < 4; ++k) line.knots[k].color = {0.2 + 0.2 * k, 0.7 - 0.15 * k, 0.5};
    const Color mid{0.5, 0.475, 0.5};
    const auto m = quantify(line, flat_refs(line.colors()), ColorSample::flat(mid));
    CHECK(std::abs(m.value - 3.0) <= 0.01 * line.span());

    // A colour 0.4 away from the curve still returns a value, with low confidence.
    const auto curve = fit_curve(nitrate.colors());
    const Color far{0.0, 1.0, 0.0};
    REQUIRE(project(curve, far).distance >= 0.4);
    const auto g = quantify(nitrate, refs, ColorSample::flat(far));
    CHECK(g.confidence < 0.01);
}

TEST_CASE("knot fidelity across all default scales") {
    for (const auto& scale : default_scales()) {
        const auto refs = flat_refs(scale.colors());
        for (int k = 0; k < 4; ++k) {
            const auto m = quantify(scale, refs, ColorSample::flat(scale.knots[k].color));
            CHECK(std::abs(m.value - scale.knots[k].value) <= 1e-6 * scale.span());
        }
    }
}

TEST_CASE("values are monotone along the curve") {
    for (const auto& scale : default_scales()) {
        const auto curve = fit_curve(scale.colors());
        const auto refs = flat_refs(scale.colors());
        double previous = -1e300;
        for (int i = 0; i <= 200; ++i) {
            const double v = quantify(scale, refs, ColorSample::flat(curve.at(i / 200.0))).value;
            CHECK(v >= previous - 1e-9);
            previous = v;
        }
    }
}

TEST_CASE("scaling knot values scales the output and keeps tStar") {
    const auto& hardness = scale_for(default_scales(), ChemicalKind::Hardness);
    ReferenceScale doubled = hardness;
    for (auto& k : doubled.knots) k.value *= 2.5;
    const Color reactant{0.5, 0.45, 0.57};
    const auto a = quantify(hardness, flat_refs(hardness.colors()), ColorSample::flat(reactant));
    const auto b = quantify(doubled, flat_refs(doubled.colors()), ColorSample::flat(reactant));
    CHECK(b.tStar == a.tStar);
    CHECK(b.value == doctest::Approx(2.5 * a.value));
}

TEST_CASE("channel permutation leaves the reading unchanged") {
    const auto& lead = scale_for(default_scales(), ChemicalKind::Lead);
    ReferenceScale permuted = lead;
    for (auto& k : permuted.knots) k.color = {k.color.b, k.color.r, k.color.g};
    const Color reactant{0.83, 0.62, 0.55};
    const auto a = quantify(lead, flat_refs(lead.colors()), ColorSample::flat(reactant));
    const auto b = quantify(permuted, flat_refs(permuted.colors()),
                            ColorSample::flat({reactant.b, reactant.r, reactant.g}));
    CHECK(b.tStar == doctest::Approx(a.tStar).epsilon(1e-6));
    CHECK(b.value == doctest::Approx(a.value).epsilon(1e-6));
}

TEST_CASE("quadratic least squares is available for noisy scales") {
    const auto& nitrate = scale_for(default_scales(), ChemicalKind::Nitrate);
    const auto curve = fit_curve(nitrate.colors(), CurveModel::QuadraticLeastSquares);
    for (int ch = 0; ch < 3; ++ch) CHECK(curve.coefficients[ch][3] == 0.0);
    CHECK(distance(curve.at(0.0), nitrate.knots[0].color) < 0.05);
}
