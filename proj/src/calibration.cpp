#include "guttation/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "guttation/errors.hpp"

namespace guttation {

namespace {

// Solves the n x n system in place (partial pivoting). n <= 4.
template <int N>
std::array<double, N> solve(std::array<std::array<double, N>, N> a, std::array<double, N> b) {
    for (int col = 0; col < N; ++col) {
        int pivot = col;
        for (int r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < N; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (int r = N - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < N; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

double squared_distance(const CalibrationCurve& curve, const Color& target, double t) {
    const Color c = curve.at(t);
    const double dr = c.r - target.r, dg = c.g - target.g, db = c.b - target.b;
    return dr * dr + dg * dg + db * db;
}

double golden_section(const CalibrationCurve& curve, const Color& target, double lo, double hi, double tol) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double f1 = squared_distance(curve, target, x1), f2 = squared_distance(curve, target, x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = squared_distance(curve, target, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = squared_distance(curve, target, x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

Color CalibrationCurve::at(double t) const {
    Color out;
    for (int ch = 0; ch < 3; ++ch) {
        const auto& c = coefficients[ch];
        out[ch] = ((c[3] * t + c[2]) * t + c[1]) * t + c[0];
    }
    return out;
}

Color CalibrationCurve::derivative(double t) const {
    Color out;
    for (int ch = 0; ch < 3; ++ch) {
        const auto& c = coefficients[ch];
        out[ch] = (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1];
    }
    return out;
}

CalibrationCurve fit_curve(const std::array<Color, 4>& referenceColors, CurveModel model) {
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            const double d = distance(referenceColors[i], referenceColors[j]);
            if (!(d >= kMinKnotColorSeparation))
                throw Error(ErrorCode::DegenerateColors, "reference colours " + std::to_string(i) + " and " +
                                                             std::to_string(j) + " are indistinguishable (" +
                                                             std::to_string(d) + ")");
        }
    }

    CalibrationCurve curve;
    curve.model = model;
    if (model == CurveModel::Cubic) {
        std::array<std::array<double, 4>, 4> v{};
        for (int k = 0; k < 4; ++k) {
            const double t = knot_parameter(k);
            v[k] = {1.0, t, t * t, t * t * t};
        }
        for (int ch = 0; ch < 3; ++ch) {
            std::array<double, 4> rhs{};
            for (int k = 0; k < 4; ++k) rhs[k] = referenceColors[k][ch];
            curve.coefficients[ch] = solve<4>(v, rhs);
        }
    } else {
        std::array<std::array<double, 3>, 3> normal{};
        for (int k = 0; k < 4; ++k) {
            const double t = knot_parameter(k);
            const double row[3] = {1.0, t, t * t};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) normal[a][b] += row[a] * row[b];
        }
        for (int ch = 0; ch < 3; ++ch) {
            std::array<double, 3> rhs{};
            for (int k = 0; k < 4; ++k) {
                const double t = knot_parameter(k);
                rhs[0] += referenceColors[k][ch];
                rhs[1] += t * referenceColors[k][ch];
                rhs[2] += t * t * referenceColors[k][ch];
            }
            const auto q = solve<3>(normal, rhs);
            curve.coefficients[ch] = {q[0], q[1], q[2], 0.0};
        }
    }
    for (const auto& channel : curve.coefficients)
        for (double c : channel)
            if (!std::isfinite(c)) throw Error(ErrorCode::DegenerateColors, "non-finite curve coefficient");
    return curve;
}

Projection project(const CalibrationCurve& curve, const Color& reactant, const CalibrationConfig& config) {
    const int n = std::max(config.sampleCount, 2);
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) f[i] = squared_distance(curve, reactant, static_cast<double>(i) / (n - 1));

    // Every discrete local minimum is refined so that a near-tie between two
    // basins cannot be decided by sampling resolution alone.
    struct Candidate {
        double f;
        double t;
    };
    std::vector<Candidate> candidates{{f.front(), 0.0}, {f.back(), 1.0}};
    std::vector<int> minima;
    for (int i = 0; i < n; ++i) {
        const bool left_ok = i == 0 || f[i] <= f[i - 1];
        const bool right_ok = i == n - 1 || f[i] <= f[i + 1];
        if (left_ok && right_ok) minima.push_back(i);
    }
    std::sort(minima.begin(), minima.end(), [&](int a, int b) { return f[a] < f[b] || (f[a] == f[b] && a < b); });
    if (minima.size() > 8) minima.resize(8);
    for (int i : minima) {
        const double lo = static_cast<double>(std::max(i - 1, 0)) / (n - 1);
        const double hi = static_cast<double>(std::min(i + 1, n - 1)) / (n - 1);
        const double t = golden_section(curve, reactant, lo, hi, config.refineTolerance);
        candidates.push_back({squared_distance(curve, reactant, t), t});
        candidates.push_back({f[i], static_cast<double>(i) / (n - 1)});
    }
    const Candidate best = *std::min_element(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return a.f < b.f || (a.f == b.f && a.t < b.t);
    });
    return {best.t, std::sqrt(best.f)};
}

double concentration_at(const ReferenceScale& scale, double tStar) {
    const double u = 3.0 * std::clamp(tStar, 0.0, 1.0);
    if (quantization_of(scale.chemical) == Quantization::Ordinal) {
        int level = static_cast<int>(std::floor(u));
        if (u - level > 0.5) ++level;
        return scale.knots[std::min(level, 3)].value;
    }
    const int k = std::min(static_cast<int>(std::floor(u)), 2);
    const double frac = u - k;
    return scale.knots[k].value + frac * (scale.knots[k + 1].value - scale.knots[k].value);
}

Measurement quantify(const ReferenceScale& scale, const std::array<ColorSample, 4>& referenceSamples,
                     const ColorSample& reactant, const CalibrationConfig& config) {
    std::array<Color, 4> refs;
    for (int k = 0; k < 4; ++k) refs[k] = referenceSamples[k].mean;
    CalibrationCurve curve = fit_curve(refs, config.model);
    curve.source = scale.chemical;
    const Projection p = project(curve, reactant.mean, config);

    Measurement m;
    m.chemical = scale.chemical;
    m.tStar = p.tStar;
    m.curveDistance = p.distance;
    m.value = concentration_at(scale, p.tStar);
    m.extrapolated = (p.tStar == 0.0 || p.tStar == 1.0) && p.distance > config.endpointEpsilon;
    m.confidence = std::exp(-p.distance / config.confidenceScale);
    return m;
}

}  // namespace guttation
